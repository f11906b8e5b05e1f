use super::FeError;
use crate::mesh::Point;

/// Symmetric rule on the reference triangle `(0,0), (1,0), (0,1)`.
///
/// Points are barycentric `(λ₀, λ₁, λ₂)` with reference coordinates `(λ₁, λ₂)`;
/// the weights sum to the reference area 1/2.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Maps the rule to a physical triangle: `(x, w)` pairs with `Σ w = |T|`.
    pub fn on_triangle(&self, p: &[Point; 3]) -> impl Iterator<Item = (Point, f64)> + '_ {
        let area2 = ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0])).abs();
        let p = *p;
        self.points.iter().zip(&self.weights).map(move |(l, &w)| {
            let x = [
                l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
            ];
            (x, w * area2)
        })
    }
}

fn orbit3(rule: &mut QuadratureRule, w: f64, a: f64) {
    let b = 1.0 - 2.0 * a;
    for p in [[a, a, b], [a, b, a], [b, a, a]] {
        rule.points.push(p);
        rule.weights.push(w);
    }
}

fn orbit6(rule: &mut QuadratureRule, w: f64, a: f64, b: f64) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        rule.points.push(p);
        rule.weights.push(w);
    }
}

/// Returns a rule exact for polynomials of total degree `degree` (1 to 6).
///
/// Degree 3 is served by the degree-4 rule.
pub fn quadrature_rule(degree: usize) -> Result<QuadratureRule, FeError> {
    let third = 1.0 / 3.0;
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        degree,
    };
    match degree {
        1 => {
            rule.points.push([third; 3]);
            rule.weights.push(0.5);
        }
        2 => {
            for p in [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]] {
                rule.points.push(p);
                rule.weights.push(1.0 / 6.0);
            }
        }
        3 | 4 => {
            rule.degree = 4;
            orbit3(&mut rule, 0.111_690_794_839_005_732_847_503_5, 0.445_948_490_915_964_886_318_329_3);
            orbit3(&mut rule, 0.054_975_871_827_660_933_819_163_16, 0.091_576_213_509_770_743_459_571_46);
        }
        5 => {
            rule.points.push([third; 3]);
            rule.weights.push(0.1125);
            orbit3(&mut rule, 0.066_197_076_394_253_090_368_824_69, 0.470_142_064_105_115_089_770_441_2);
            orbit3(&mut rule, 0.062_969_590_272_413_576_297_841_97, 0.101_286_507_323_456_338_800_987_4);
        }
        6 => {
            orbit3(&mut rule, 0.058_393_137_863_189_683_012_644_81, 0.249_286_745_170_910_421_291_638_6);
            orbit3(&mut rule, 0.025_422_453_185_103_408_460_468_4, 0.063_089_014_491_502_228_340_331_6);
            orbit6(
                &mut rule,
                0.041_425_537_809_186_787_596_776_73,
                0.053_145_049_844_816_947_353_249_67,
                0.310_352_451_033_784_405_416_607_7,
            );
        }
        d => return Err(FeError::UnsupportedDegree(d)),
    }
    Ok(rule)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(points: usize) -> (&'static [f64], &'static [f64]) {
    const X2: [f64; 2] = [0.211_324_865_405_187_117_745_425_609_75, 0.788_675_134_594_812_882_254_574_390_25];
    const W2: [f64; 2] = [0.5, 0.5];
    const X5: [f64; 5] = [
        0.046_910_077_030_668_003_601_186_560_85,
        0.230_765_344_947_158_454_481_842_789_65,
        0.5,
        0.769_234_655_052_841_545_518_157_210_35,
        0.953_089_922_969_331_996_398_813_439_15,
    ];
    const W5: [f64; 5] = [
        0.118_463_442_528_094_543_757_132_020_36,
        0.239_314_335_249_683_234_020_645_757_42,
        0.284_444_444_444_444_444_444_444_444_44,
        0.239_314_335_249_683_234_020_645_757_42,
        0.118_463_442_528_094_543_757_132_020_36,
    ];
    match points {
        2 => (&X2, &W2),
        5 => (&X5, &W5),
        n => panic!("no {n}-point Gauss–Legendre rule"),
    }
}
