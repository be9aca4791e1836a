//! 1-D adaptive Gauss-Kronrod quadrature and Gauss-Legendre rules, used
//! for the radial single-site integrals and the interpolation-parameter
//! integrals.

/// 15-point Kronrod abscissae (positive half), QUADPACK dqk15.
const XGK: [f64; 8] = [
    0.9914553711208126,
    0.9491079123427585,
    0.8648644233597691,
    0.7415311855993944,
    0.5860872354676911,
    0.4058451513773972,
    0.2077849550078985,
    0.0,
];

const WGK: [f64; 8] = [
    0.02293532201052922,
    0.06309209262997855,
    0.1047900103222502,
    0.1406532597155259,
    0.1690047266392679,
    0.1903505780647854,
    0.2044329400752989,
    0.2094821410847278,
];

const WG: [f64; 4] = [
    0.1294849661688697,
    0.2797053914892767,
    0.3818300505051189,
    0.4179591836734694,
];

/// One Gauss-Kronrod 7/15 panel on [a, b]; returns (kronrod value,
/// |kronrod - gauss| error estimate).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_gauss = WG[3] * f_center;
    let mut res_kronrod = WGK[7] * f_center;
    for j in 0..3 {
        let x = half * XGK[2 * j + 1];
        let fsum = f(center - x) + f(center + x);
        res_gauss += WG[j] * fsum;
        res_kronrod += WGK[2 * j + 1] * fsum;
    }
    for j in 0..4 {
        let x = half * XGK[2 * j];
        let fsum = f(center - x) + f(center + x);
        res_kronrod += WGK[2 * j] * fsum;
    }
    let value = res_kronrod * half;
    let err = ((res_kronrod - res_gauss) * half).abs();
    (value, err)
}

/// Adaptive bisection driven by the Kronrod error estimate.  Stops when
/// the accumulated error estimate is below `rel_tol * |value| + abs_tol`.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> (f64, f64) {
    #[derive(Debug)]
    struct Panel {
        a: f64,
        b: f64,
        value: f64,
        err: f64,
    }
    let (value, err) = gk15(f, a, b);
    let mut panels = vec![Panel { a, b, value, err }];
    for _ in 0..2000 {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= rel_tol * total.abs() + abs_tol {
            break;
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let Panel { a, b, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // interval exhausted at machine precision
            let (v, e) = gk15(f, a, b);
            panels.push(Panel {
                a,
                b,
                value: v,
                err: e,
            });
            break;
        }
        let (v1, e1) = gk15(f, a, mid);
        let (v2, e2) = gk15(f, mid, b);
        panels.push(Panel {
            a,
            b: mid,
            value: v1,
            err: e1,
        });
        panels.push(Panel {
            a: mid,
            b,
            value: v2,
            err: e2,
        });
    }
    let total: f64 = panels.iter().map(|p| p.value).sum();
    let total_err: f64 = panels.iter().map(|p| p.err).sum();
    (total, total_err)
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// ln Γ(x) for x > 0, Lanczos approximation (g = 7, 9 terms), accurate to
/// about 1e-13 relative.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// ln(m!) computed by direct summation (exact to f64 rounding for the
/// ranges used here).
pub fn ln_factorial(m: u64) -> f64 {
    (2..=m).map(|i| (i as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk15_polynomial_is_exact() {
        let f = |x: f64| 3.0 * x * x;
        let (v, _) = gk15(&f, 0.0, 2.0);
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_gaussian() {
        let f = |x: f64| (-x * x).exp();
        let (v, e) = adaptive(&f, -10.0, 10.0, 1e-12, 0.0);
        let exact = std::f64::consts::PI.sqrt();
        assert!((v - exact).abs() < 1e-11, "v={v} err={e}");
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        let rule = gauss_legendre_unit(8);
        // degree 15 exactness on [0,1]
        for k in 0..=15u32 {
            let approx: f64 = rule.iter().map(|&(x, w)| w * x.powi(k as i32)).sum();
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((approx - exact).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..20u64 {
            let lhs = ln_gamma(n as f64 + 1.0);
            let rhs = ln_factorial(n);
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        }
        // Γ(1/2) = √π
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-12);
    }
}
