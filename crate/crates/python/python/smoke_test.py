"""Smoke test for the stokes_afem_py extension module.

Build first, e.g. `maturin develop -m crates/python/Cargo.toml`, then run
`python crates/python/python/smoke_test.py`.
"""

import json
import math

import stokes_afem_py as sa


def main():
    mesh = sa.generate_domain("square", 2)
    assert mesh.n_triangles == 8
    assert abs(mesh.total_area() - 1.0) < 1e-12

    sol = sa.solve(mesh, "full")
    assert 30.0 < sol.eigenvalue < 60.0, sol.eigenvalue
    u = sol.velocity
    assert len(u) == mesh.n_triangles
    area = 1.0 / mesh.n_triangles
    assert abs(sum(area * (a * a + b * b) for a, b in u) - 1.0) < 1e-9

    eta = sa.indicators(mesh, sol, "eta")
    theta = sa.indicators(mesh, sol, "theta")
    assert all(e >= t for e, t in zip(eta, theta))

    marked = sa.mark(mesh, eta, 0.5)
    finer = mesh.bisect(marked)
    assert finer.is_conforming() and finer.n_triangles > mesh.n_triangles

    again = sa.Mesh.from_msh(finer.to_msh())
    assert again.triangles == finer.triangles

    rows = sa.run_campaign(json.dumps({"domain": "square", "n0": 2, "max_iter": 3}))
    assert len(rows) == 4 and rows[-1]["err"] < rows[0]["err"]

    ref = sa.reference_eigenvalue("tshape")
    assert math.isclose(ref, 80.87944)

    failed = [r for r in sa.selftest() if not r[3]]
    assert not failed, failed
    print("smoke test passed: lambda_h1 on the final square mesh =", rows[-1]["lambda_h1"])


if __name__ == "__main__":
    main()
