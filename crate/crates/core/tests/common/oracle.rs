//! Brute-force midpoint Riemann sums for the log marginal likelihood under a
//! uniform prior. Shares nothing with the library beyond the input series.

pub const ORACLE_NODES: usize = 1_000_000;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub enum OracleSigma {
    Known(f64),
    Uniform(f64, f64),
}

/// Oracle domain of a fixture model id: rho intervals and sigma.
pub fn oracle_domain(id: &str) -> (Vec<(f64, f64)>, OracleSigma) {
    match id {
        "M1" => (vec![(-1.0, 1.0)], OracleSigma::Known(1.0)),
        "M2" => (vec![(-1.5, -1.0), (1.0, 1.5)], OracleSigma::Known(1.0)),
        "M1prime" => (vec![(0.0, 1.0)], OracleSigma::Known(1.0)),
        "M3" => (vec![(-1.5, -1.0)], OracleSigma::Known(1.0)),
        "M1sigma" => (vec![(-1.0, 1.0)], OracleSigma::Uniform(0.1, 5.0)),
        other => panic!("unknown fixture model {other}"),
    }
}

fn gauss_loglik(n: f64, rss: f64, sigma: f64) -> f64 {
    -0.5 * n * (LN_2PI + 2.0 * sigma.ln()) - rss / (2.0 * sigma * sigma)
}

/// `log sum_i exp(a_i) w` over terms produced twice by `terms`.
fn log_sum_exp<I: Iterator<Item = f64>>(terms: impl Fn() -> I) -> f64 {
    let max = terms().fold(f64::NEG_INFINITY, f64::max);
    max + terms().map(|a| (a - max).exp()).sum::<f64>().ln()
}

/// Midpoint nodes of `[lo, hi]` split into `k` cells.
fn midpoints(lo: f64, hi: f64, k: usize) -> impl Iterator<Item = (f64, f64)> + Clone {
    let h = (hi - lo) / k as f64;
    (0..k).map(move |i| (lo + (i as f64 + 0.5) * h, h))
}

/// `log ∫ L(rho, sigma) pi(rho, sigma)` with `ORACLE_NODES` nodes in total.
pub fn riemann_log_marginal(values: &[f64], rho: &[(f64, f64)], sigma: OracleSigma) -> f64 {
    // The three sums behind the residual sum of squares, x_0 = 0.
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let mut prev = 0.0;
    for &x in values {
        syy += x * x;
        sxy += x * prev;
        sxx += prev * prev;
        prev = x;
    }
    let n = values.len() as f64;
    let rss = |r: f64| syy - 2.0 * r * sxy + r * r * sxx;
    let rho_len: f64 = rho.iter().map(|(a, b)| b - a).sum();

    let (rho_nodes, sigma_nodes) = match sigma {
        OracleSigma::Known(_) => (ORACLE_NODES, 1),
        OracleSigma::Uniform(..) => (1000, 1000),
    };
    let rho_grid: Vec<(f64, f64)> = rho
        .iter()
        .flat_map(|&(a, b)| midpoints(a, b, ((b - a) / rho_len * rho_nodes as f64).round() as usize))
        .collect();
    match sigma {
        OracleSigma::Known(s) => log_sum_exp(|| rho_grid.iter().map(move |&(r, w)| gauss_loglik(n, rss(r), s) + w.ln())) - rho_len.ln(),
        OracleSigma::Uniform(lo, hi) => {
            let sigma_grid: Vec<(f64, f64)> = midpoints(lo, hi, sigma_nodes).collect();
            let terms = || {
                rho_grid
                    .iter()
                    .flat_map(|&(r, wr)| sigma_grid.iter().map(move |&(s, ws)| gauss_loglik(n, rss(r), s) + (wr * ws).ln()))
            };
            log_sum_exp(terms) - (rho_len * (hi - lo)).ln()
        }
    }
}
