use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::params::{DirichletParams, SimplexVector};
use super::special::{ln_gamma, lower_gamma_p, psi, upper_gamma_q};

/// Draws ln z for z ~ Gamma(shape, 1) with Marsaglia–Tsang; shapes below 1
/// use z(a) = z(a + 1)·u^{1/a}. Working in log space keeps tiny shapes from
/// underflowing to an exact zero.
pub fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let u: f64 = 1.0 - rng.random::<f64>();
        return sample_log_gamma(shape + 1.0, rng) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = 1.0 - rng.random::<f64>();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return (d * v).ln();
        }
    }
}

/// One Dirichlet draw built from independent Gamma variables normalised onto
/// the simplex.
pub fn sample<R: Rng + ?Sized>(params: &DirichletParams, rng: &mut R) -> SimplexVector {
    let log_z: Vec<f64> = params
        .alpha()
        .iter()
        .map(|&a| sample_log_gamma(a, rng))
        .collect();
    SimplexVector::new_unchecked(normalise_log(&log_z))
}

fn normalise_log(log_z: &[f64]) -> Vec<f64> {
    let max = log_z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_z.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// A Dirichlet draw together with the pathwise derivatives needed to push
/// gradients back to the concentration parameters.
#[derive(Debug, Clone)]
pub struct ReparamSample {
    f: SimplexVector,
    /// d ln z_d / d α_d for each Gamma component.
    dlog_z: Vec<f64>,
}

impl ReparamSample {
    pub fn value(&self) -> &SimplexVector {
        &self.f
    }

    pub fn log_gamma_derivatives(&self) -> &[f64] {
        &self.dlog_z
    }

    /// ∂f_i/∂α_j = f_i (δ_ij − f_j) · d ln z_j / d α_j, row `i`, column `j`.
    pub fn jacobian(&self) -> Vec<Vec<f64>> {
        let f = self.f.as_slice();
        let d = f.len();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        f[i] * (delta - f[j]) * self.dlog_z[j]
                    })
                    .collect()
            })
            .collect()
    }

    /// Σ_i upstream_i ∂f_i/∂α_j without materialising the Jacobian.
    pub fn vjp(&self, upstream: &[f64]) -> Vec<f64> {
        let f = self.f.as_slice();
        let weighted: f64 = upstream.iter().zip(f).map(|(u, fi)| u * fi).sum();
        f.iter()
            .zip(upstream)
            .zip(&self.dlog_z)
            .map(|((fj, uj), dz)| fj * (uj - weighted) * dz)
            .collect()
    }
}

/// Draws `f ~ Dir(α)` and returns the implicit reparameterisation gradient.
///
/// For each Gamma component with CDF F(z; α), holding F fixed gives
/// dz/dα = −(∂F/∂α)/(∂F/∂z), where ∂F/∂z is the Gamma density and ∂F/∂α is a
/// central difference in α. The simplex map f = z/Σz is then differentiated
/// analytically.
pub fn sample_with_grad<R: Rng + ?Sized>(params: &DirichletParams, rng: &mut R) -> ReparamSample {
    let log_z: Vec<f64> = params
        .alpha()
        .iter()
        .map(|&a| sample_log_gamma(a, rng))
        .collect();
    let dlog_z = params
        .alpha()
        .iter()
        .zip(&log_z)
        .map(|(&a, &lz)| dlog_gamma_dshape(a, lz))
        .collect();
    ReparamSample {
        f: SimplexVector::new_unchecked(normalise_log(&log_z)),
        dlog_z,
    }
}

/// Step used for the α-difference of the Gamma CDF.
pub(crate) fn shape_step(a: f64) -> f64 {
    (1e-5f64).max(1e-5 * a).min(0.5 * a)
}

/// d ln z / d a for z = exp(log_z) drawn from Gamma(a, 1).
pub fn dlog_gamma_dshape(a: f64, log_z: f64) -> f64 {
    let z = log_z.exp();
    if z < 1e-280 {
        // Lower tail: F ≈ z^a / Γ(a + 1), so d ln z/da = (ψ(a + 1) − ln z)/a.
        return (psi(a + 1.0) - log_z) / a;
    }
    let h = shape_step(a);
    let dcdf = if z < a + 1.0 {
        (lower_gamma_p(a + h, z) - lower_gamma_p(a - h, z)) / (2.0 * h)
    } else {
        -(upper_gamma_q(a + h, z) - upper_gamma_q(a - h, z)) / (2.0 * h)
    };
    // z · pdf(z) in log space.
    let log_z_pdf = a * log_z - z - ln_gamma(a);
    let denom = log_z_pdf.exp();
    if denom == 0.0 || !denom.is_finite() {
        return 0.0;
    }
    -dcdf / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dir(a: &[f64]) -> DirichletParams {
        DirichletParams::new(a.to_vec()).unwrap()
    }

    #[test]
    fn one_component_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = dir(&[0.7]);
        for _ in 0..10 {
            assert_eq!(sample(&p, &mut rng).as_slice(), &[1.0]);
            let s = sample_with_grad(&p, &mut rng);
            assert_eq!(s.jacobian(), vec![vec![0.0]]);
        }
    }

    #[test]
    fn samples_lie_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for a in [[0.01, 0.02, 5.0], [1e-4, 1e-4, 1e-4], [40.0, 0.5, 3.0]] {
            let p = dir(&a);
            for _ in 0..2_000 {
                let f = sample(&p, &mut rng);
                let total: f64 = f.as_slice().iter().sum();
                assert!((total - 1.0).abs() < 1e-9);
                assert!(f.as_slice().iter().all(|v| *v >= 0.0 && v.is_finite()));
            }
        }
    }

    #[test]
    fn gamma_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for a in [0.3, 1.0, 4.5] {
            let n = 200_000;
            let draws: Vec<f64> = (0..n)
                .map(|_| sample_log_gamma(a, &mut rng).exp())
                .collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n as f64;
            // Mean and variance of Gamma(a, 1) are both a.
            let se = (a / n as f64).sqrt();
            assert!((mean - a).abs() < 5.0 * se, "a={a} mean {mean}");
            assert!((var - a).abs() < 0.05 * a, "a={a} var {var}");
        }
    }

    #[test]
    fn empirical_mean_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = dir(&[2.0, 5.0]);
        let n = 200_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let f = sample(&p, &mut rng);
            acc[0] += f.as_slice()[0];
            acc[1] += f.as_slice()[1];
        }
        assert!((acc[0] / n as f64 - 2.0 / 7.0).abs() < 0.005);
        assert!((acc[1] / n as f64 - 5.0 / 7.0).abs() < 0.005);
    }

    #[test]
    fn expected_log_matches_sufficient_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = dir(&[2.0, 5.0]);
        let want = p.expected_sufficient_stat();
        let n = 1_000_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let f = sample(&p, &mut rng);
            acc[0] += f.as_slice()[0].ln();
            acc[1] += f.as_slice()[1].ln();
        }
        for d in 0..2 {
            assert!((acc[d] / n as f64 - want[d]).abs() < 0.01);
        }
    }

    #[test]
    fn shape_derivative_matches_quantile_differences() {
        // Hold u = F(z; a) fixed and move a: z(a ± h) from inverting the CDF
        // by bisection gives an independent central difference.
        fn quantile(a: f64, u: f64) -> f64 {
            let (mut lo, mut hi) = (0.0f64, 200.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if lower_gamma_p(a, mid) < u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
        for (a, u) in [(0.5, 0.3), (2.0, 0.5), (3.0, 0.9), (10.0, 0.1), (0.2, 0.8)] {
            let z = quantile(a, u);
            let h = 1e-4 * a;
            let fd = (quantile(a + h, u).ln() - quantile(a - h, u).ln()) / (2.0 * h);
            let got = dlog_gamma_dshape(a, z.ln());
            assert!(
                (got - fd).abs() < 1e-4 * fd.abs().max(1.0),
                "a={a} u={u}: {got} vs {fd}"
            );
        }
    }

    #[test]
    fn lower_tail_derivative_is_finite() {
        let g = dlog_gamma_dshape(1e-3, -900.0);
        assert!(g.is_finite() && g > 0.0);
    }

    #[test]
    fn vjp_matches_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = sample_with_grad(&dir(&[0.4, 2.0, 3.5, 1.1]), &mut rng);
        let up = [0.3, -1.0, 2.0, 0.5];
        let jac = s.jacobian();
        let v = s.vjp(&up);
        for j in 0..4 {
            let direct: f64 = (0..4).map(|i| up[i] * jac[i][j]).sum();
            assert!((direct - v[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_expected_gradient_signs() {
        // h(f) = f[0]: raising α0 raises E[f0], raising α1 lowers it, equally.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = dir(&[1.5, 1.5]);
        let n = 100_000;
        let mut g = [0.0; 2];
        for _ in 0..n {
            let s = sample_with_grad(&p, &mut rng);
            let v = s.vjp(&[1.0, 0.0]);
            g[0] += v[0];
            g[1] += v[1];
        }
        g[0] /= n as f64;
        g[1] /= n as f64;
        // Exact: ∂/∂α0 of α0/(α0+α1) = α1/α̂² = 1/6.
        assert!(g[0] > 0.0 && g[1] < 0.0);
        assert!((g[0] + g[1]).abs() < 0.01, "{g:?}");
        assert!((g[0] - 1.0 / 6.0).abs() < 0.01);
    }
}
