//! Quadrature rules on the reference triangle (0,0)-(1,0)-(0,1) and the
//! reference square [-1,1]^2, plus the escalation policy for rough
//! coefficients and learned maps.

/// Quadrature rule with explicit points and weights.
///
/// `order` is the highest total polynomial degree integrated exactly.
/// Weights sum to the reference element measure (1/2 for the triangle,
/// 4 for the square).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }
}

/// Triangle rule of at least the requested order.
pub fn triangle_rule(order: usize) -> QuadratureRule {
    match order {
        0 | 1 => QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            order: 1,
        },
        2 | 3 => {
            // 3-point midpoint-style rule, degree 2
            let a = 1.0 / 6.0;
            let b = 2.0 / 3.0;
            QuadratureRule {
                points: vec![[a, a], [b, a], [a, b]],
                weights: vec![1.0 / 6.0; 3],
                order: 2,
            }
        }
        _ if order <= 4 => {
            // 6-point rule, degree 4
            let a = 0.445948490915965;
            let wa = 0.223381589678011 / 2.0;
            let b = 0.091576213509771;
            let wb = 0.109951743655322 / 2.0;
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (t, w) in [(a, wa), (b, wb)] {
                let s = 1.0 - 2.0 * t;
                points.push([t, t]);
                points.push([s, t]);
                points.push([t, s]);
                weights.extend_from_slice(&[w, w, w]);
            }
            QuadratureRule { points, weights, order: 4 }
        }
        _ => triangle_rule_duffy(order),
    }
}

/// High-order triangle rule via the collapsed-square (Duffy) map
/// (u,v) -> (u, v(1-u)); used mostly as a test oracle.
pub fn triangle_rule_duffy(order: usize) -> QuadratureRule {
    let n = order / 2 + 2;
    let (nodes, wts) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (u01, wu) in nodes.iter().zip(&wts).map(|(x, w)| ((x + 1.0) / 2.0, w / 2.0)) {
        for (v01, wv) in nodes.iter().zip(&wts).map(|(x, w)| ((x + 1.0) / 2.0, w / 2.0)) {
            points.push([u01, v01 * (1.0 - u01)]);
            weights.push(wu * wv * (1.0 - u01));
        }
    }
    QuadratureRule { points, weights, order }
}

/// Tensor-product Gauss rule on [-1,1]^2 with `nx` x `ny` points.
pub fn square_rule_tensor(nx: usize, ny: usize) -> QuadratureRule {
    let (xs, wxs) = gauss_legendre(nx);
    let (ys, wys) = gauss_legendre(ny);
    let mut points = Vec::with_capacity(nx * ny);
    let mut weights = Vec::with_capacity(nx * ny);
    for (x, wx) in xs.iter().zip(&wxs) {
        for (y, wy) in ys.iter().zip(&wys) {
            points.push([*x, *y]);
            weights.push(wx * wy);
        }
    }
    QuadratureRule {
        points,
        weights,
        order: 2 * nx.min(ny) - 1,
    }
}

/// Square rule of at least the requested total-degree order.
pub fn square_rule(order: usize) -> QuadratureRule {
    let n = order / 2 + 1;
    square_rule_tensor(n, n)
}

/// Gauss-Legendre nodes and weights on [-1,1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Coefficient-smoothness classes that drive quadrature selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientClass {
    Smooth,
    Discontinuous,
}

/// Map-smoothness classes that drive quadrature selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapClass {
    Identity,
    Analytic,
    Learned,
}

/// Triangle and square rules for assembly, escalated when the coefficient
/// is discontinuous or the map is learned.
pub fn select_quadrature(
    coeff: CoefficientClass,
    map: MapClass,
) -> (QuadratureRule, QuadratureRule) {
    let escalate = coeff == CoefficientClass::Discontinuous || map == MapClass::Learned;
    if escalate {
        (triangle_rule(4), square_rule(4))
    } else {
        (triangle_rule(2), square_rule_tensor(2, 2))
    }
}
