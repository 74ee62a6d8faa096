//! Twelve-line spectral fit: amplitudes and baseline by nonnegative least
//! squares inside a Levenberg-Marquardt loop over the shared shape (and
//! optionally per-line position shifts).

use serde::{Deserialize, Serialize};

use super::nnls::nnls;
use super::FitError;
use crate::linalg::{invert_dense, solve_dense};
use crate::lineshape::{CompositeProfile, LineshapeModel};
use crate::real::{c, Real};
use crate::spin_system::{polarizations, HyperfineState, Polarization, TransitionCatalog};

/// Starting point and structure of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitModel<T> {
    /// Nominal line energies, MHz.
    pub positions: [T; 12],
    pub strengths: [T; 12],
    pub states: [HyperfineState; 12],
    /// Initial shape; its saturation is folded into the fitted width.
    pub lineshape: LineshapeModel<T>,
    pub fit_tail: bool,
    /// Let each line move by up to 0.2 composite FWHM.
    pub refine_positions: bool,
}

impl<T: Real> FitModel<T> {
    pub fn from_catalog(catalog: &TransitionCatalog<T>, lineshape: LineshapeModel<T>) -> Self {
        let mut positions = [T::zero(); 12];
        let mut strengths = [T::zero(); 12];
        let mut states = [HyperfineState::UP_UP; 12];
        for (i, line) in catalog.lines.iter().enumerate() {
            positions[i] = line.energy;
            strengths[i] = line.strength;
            states[i] = line.initial_state;
        }
        Self {
            positions,
            strengths,
            states,
            lineshape: LineshapeModel {
                gamma_hom: lineshape.effective_fwhm(),
                saturation_s: T::zero(),
                ..lineshape
            },
            fit_tail: lineshape.tail_tau > T::zero(),
            refine_positions: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions<T> {
    pub max_iterations: usize,
    /// Converged once an accepted step lowers the cost by less than this
    /// fraction.
    pub tolerance: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: c(1e-10),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate<T> {
    pub name: String,
    pub value: T,
    /// Curvature-based standard error; NaN when the curvature is singular.
    pub sigma: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport<T> {
    /// Percent, canonical order; `None` when the amplitudes vanish.
    pub populations: Option<[T; 4]>,
    pub polarization: Option<Polarization<T>>,
    pub amplitudes: [T; 12],
    pub baseline: T,
    pub lineshape: LineshapeModel<T>,
    /// Fitted line positions, MHz.
    pub positions: [T; 12],
    pub residual_rms: T,
    pub parameters: Vec<ParameterEstimate<T>>,
    pub converged: bool,
    pub iterations: usize,
    /// Amplitudes summed to zero, so populations cannot be normalized.
    pub normalization_error: bool,
    /// Two fitted lines closer than a quarter composite FWHM.
    pub overlap_warning: bool,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_history: Vec<T>,
}

struct Layout {
    fit_tail: bool,
    shifts: bool,
}

impl Layout {
    fn len(&self) -> usize {
        2 + usize::from(self.fit_tail) + if self.shifts { 12 } else { 0 }
    }

    fn shift_offset(&self) -> usize {
        2 + usize::from(self.fit_tail)
    }
}

struct Problem<'a, T> {
    energies: &'a [T],
    signals: &'a [T],
    model: &'a FitModel<T>,
    layout: Layout,
    shift_bound: T,
}

struct Evaluation<T> {
    cost: T,
    residuals: Vec<T>,
    coefficients: Vec<T>,
    design: Vec<T>,
    lineshape: LineshapeModel<T>,
    profile: CompositeProfile<T>,
}

impl<'a, T: Real> Problem<'a, T> {
    fn lineshape(&self, theta: &[T]) -> LineshapeModel<T> {
        LineshapeModel {
            gamma_hom: theta[0].exp(),
            sigma_gauss: theta[1].exp(),
            tail_tau: if self.layout.fit_tail {
                theta[2].exp()
            } else {
                self.model.lineshape.tail_tau
            },
            saturation_s: T::zero(),
        }
    }

    fn positions(&self, theta: &[T]) -> [T; 12] {
        let mut p = self.model.positions;
        if self.layout.shifts {
            let off = self.layout.shift_offset();
            for (i, v) in p.iter_mut().enumerate() {
                *v += theta[off + i];
            }
        }
        p
    }

    fn clamp(&self, theta: &mut [T]) {
        if self.layout.shifts {
            let off = self.layout.shift_offset();
            for v in theta[off..].iter_mut() {
                *v = v.max(-self.shift_bound).min(self.shift_bound);
            }
        }
        // keep the widths inside a sane numeric range
        for v in theta[..self.layout.shift_offset()].iter_mut() {
            *v = v.max(c(-12.0)).min(c(12.0));
        }
    }

    fn evaluate_with(&self, theta: &[T], profile: Option<(&LineshapeModel<T>, &CompositeProfile<T>)>) -> Result<Evaluation<T>, FitError> {
        let lineshape = self.lineshape(theta);
        let profile = match profile {
            Some((ls, p)) if *ls == lineshape => p.clone(),
            _ => CompositeProfile::new(&lineshape)?,
        };
        let m = self.energies.len();
        let positions = self.positions(theta);
        let mut design = vec![T::zero(); m * 13];
        for (i, &pos) in positions.iter().enumerate() {
            for (j, &e) in self.energies.iter().enumerate() {
                design[i * m + j] = profile.eval(e - pos);
            }
        }
        for j in 0..m {
            design[12 * m + j] = T::one();
        }
        let coefficients = nnls(&design, m, self.signals, &[true; 13]);
        let mut residuals = self.signals.to_vec();
        for (k, &x) in coefficients.iter().enumerate() {
            if x != T::zero() {
                for (r, &a) in residuals.iter_mut().zip(design[k * m..(k + 1) * m].iter()) {
                    *r -= a * x;
                }
            }
        }
        let cost = c::<T>(0.5) * residuals.iter().map(|r| *r * *r).sum::<T>();
        Ok(Evaluation {
            cost,
            residuals,
            coefficients,
            design,
            lineshape,
            profile,
        })
    }

    fn jacobian(&self, theta: &[T], base: &Evaluation<T>) -> Result<Vec<T>, FitError> {
        let m = self.energies.len();
        let p = theta.len();
        let fwhm = base.profile.fwhm().unwrap_or(base.lineshape.gamma_hom);
        let mut jac = vec![T::zero(); m * p];
        for k in 0..p {
            let h = if k >= self.layout.shift_offset() {
                fwhm * c(1e-6)
            } else {
                c(1e-6)
            };
            let mut t = theta.to_vec();
            t[k] += h;
            let shape_only = k >= self.layout.shift_offset();
            let ev = self.evaluate_with(&t, shape_only.then_some((&base.lineshape, &base.profile)))?;
            for j in 0..m {
                jac[k * m + j] = (ev.residuals[j] - base.residuals[j]) / h;
            }
        }
        Ok(jac)
    }
}

pub fn fit_spectrum<T: Real>(
    energies: &[T],
    signals: &[T],
    init: &FitModel<T>,
    options: &FitOptions<T>,
) -> Result<FitReport<T>, FitError> {
    if energies.len() != signals.len() {
        return Err(FitError::LengthMismatch {
            energies: energies.len(),
            signals: signals.len(),
        });
    }
    if energies.len() < 16 {
        return Err(FitError::TooFewPoints(energies.len()));
    }
    if energies.iter().chain(signals.iter()).any(|v| !v.is_finite()) || energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FitError::NonFinite);
    }
    init.lineshape.validate()?;
    if !(init.lineshape.sigma_gauss > T::zero()) {
        return Err(FitError::InvalidInit("sigma_gauss must be > 0 to start a fit"));
    }
    if init.fit_tail && !(init.lineshape.tail_tau > T::zero()) {
        return Err(FitError::InvalidInit("tail_tau must be > 0 when the tail is fitted"));
    }

    let layout = Layout {
        fit_tail: init.fit_tail,
        shifts: init.refine_positions,
    };
    let init_fwhm = CompositeProfile::new(&init.lineshape)?.fwhm()?;
    let problem = Problem {
        energies,
        signals,
        model: init,
        shift_bound: c::<T>(0.2) * init_fwhm,
        layout,
    };
    let mut theta = vec![T::zero(); problem.layout.len()];
    theta[0] = init.lineshape.gamma_hom.ln();
    theta[1] = init.lineshape.sigma_gauss.ln();
    if problem.layout.fit_tail {
        theta[2] = init.lineshape.tail_tau.ln();
    }

    let signal_scale = signals.iter().map(|s| *s * *s).sum::<T>();
    let mut current = problem.evaluate_with(&theta, None)?;
    let mut history = vec![current.cost];
    let mut lambda = c::<T>(1e-3);
    let mut converged = false;
    let mut iterations = 0;
    let p = theta.len();
    let m = energies.len();
    let mut last_jac = Vec::new();

    if current.cost <= signal_scale * T::epsilon() * T::epsilon() || signal_scale == T::zero() {
        converged = true;
    }
    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let jac = problem.jacobian(&theta, &current)?;
        // normal equations of the linearized model
        let mut jtj = vec![T::zero(); p * p];
        let mut jtr = vec![T::zero(); p];
        for a in 0..p {
            let ja = &jac[a * m..(a + 1) * m];
            jtr[a] = ja.iter().zip(current.residuals.iter()).map(|(&x, &r)| x * r).sum();
            for b in 0..=a {
                let jb = &jac[b * m..(b + 1) * m];
                let v: T = ja.iter().zip(jb.iter()).map(|(&x, &y)| x * y).sum();
                jtj[a * p + b] = v;
                jtj[b * p + a] = v;
            }
        }
        last_jac = jac;
        let mut accepted = false;
        // parameters the cost ignores (e.g. the shift of a zero-amplitude
        // line) still need a positive damping term
        let diag_floor = (0..p)
            .map(|a| jtj[a * p + a])
            .fold(T::zero(), |acc, d| acc.max(d))
            .max(T::min_positive_value())
            * c(1e-12);
        while lambda < c(1e16) {
            let mut lhs = jtj.clone();
            for a in 0..p {
                let d = jtj[a * p + a];
                lhs[a * p + a] = d + lambda * d.max(diag_floor);
            }
            // (J^T J + lambda diag) d = -J^T r, with J = dr/dtheta
            let mut rhs: Vec<T> = jtr.iter().map(|v| -*v).collect();
            let Some(step) = solve_dense(&mut lhs, &mut rhs, p) else {
                lambda *= c(10.0);
                continue;
            };
            let mut trial = theta.clone();
            for (t, s) in trial.iter_mut().zip(step.iter()) {
                *t += *s;
            }
            problem.clamp(&mut trial);
            let ev = problem.evaluate_with(&trial, None)?;
            if ev.cost < current.cost {
                let decrease = (current.cost - ev.cost) / current.cost;
                theta = trial;
                current = ev;
                history.push(current.cost);
                lambda = (lambda / c(3.0)).max(c(1e-12));
                accepted = true;
                if decrease < options.tolerance || current.cost <= signal_scale * T::epsilon() * T::epsilon() {
                    converged = true;
                }
                break;
            }
            lambda *= c(4.0);
        }
        if !accepted {
            // no direction lowers the cost: a numerical minimum
            converged = true;
        }
    }

    Ok(report(&problem, &theta, &current, &last_jac, converged, iterations, history))
}

fn report<T: Real>(
    problem: &Problem<'_, T>,
    theta: &[T],
    ev: &Evaluation<T>,
    jac: &[T],
    converged: bool,
    iterations: usize,
    cost_history: Vec<T>,
) -> FitReport<T> {
    let model = problem.model;
    let m = problem.energies.len();
    let mut amplitudes = [T::zero(); 12];
    amplitudes.copy_from_slice(&ev.coefficients[..12]);
    let baseline = ev.coefficients[12];
    let positions = problem.positions(theta);

    let (e_lo, e_hi) = (problem.energies[0], problem.energies[m - 1]);
    let mut sums = [T::zero(); 4];
    let mut counts = [0usize; 4];
    for i in 0..12 {
        let inside = positions[i] >= e_lo && positions[i] <= e_hi;
        if inside && model.strengths[i] > T::zero() {
            let s = model.states[i].index();
            sums[s] += amplitudes[i] / model.strengths[i];
            counts[s] += 1;
        }
    }
    let mut per_state = [T::zero(); 4];
    for s in 0..4 {
        if counts[s] > 0 {
            per_state[s] = sums[s] / T::from_usize_lossy(counts[s]);
        }
    }
    let total: T = per_state.iter().copied().sum();
    let signal_max = problem.signals.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let normalization_error = !(total > signal_max * T::tolerance()) || counts.iter().any(|&n| n == 0);
    let populations = (!normalization_error).then(|| per_state.map(|v| c::<T>(100.0) * v / total));
    let polarization = populations.and_then(|p| polarizations(&p).ok());

    let fwhm = ev.profile.fwhm().unwrap_or(ev.lineshape.gamma_hom);
    let mut sorted = positions;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let overlap_warning = sorted.windows(2).any(|w| w[1] - w[0] < c::<T>(0.25) * fwhm);

    let p_shape = theta.len();
    let dof = m.saturating_sub(p_shape + 13).max(1);
    let s2 = c::<T>(2.0) * ev.cost / T::from_usize_lossy(dof);
    let mut parameters = Vec::new();
    let shape_cov = curvature_inverse(jac, m, p_shape);
    let shape_names = ["gamma_hom", "sigma_gauss", "tail_tau"];
    for k in 0..p_shape {
        let (name, value) = if k < problem.layout.shift_offset() {
            (shape_names[k].to_string(), theta[k].exp())
        } else {
            (format!("shift_{}", k - problem.layout.shift_offset() + 1), theta[k])
        };
        let var = shape_cov.as_ref().map_or(T::nan(), |cov| cov[k * p_shape + k] * s2);
        // log parameters: sigma(x) = x sigma(ln x)
        let sigma = if k < problem.layout.shift_offset() {
            value * var.max(T::zero()).sqrt()
        } else {
            var.max(T::zero()).sqrt()
        };
        parameters.push(ParameterEstimate { name, value, sigma });
    }
    let amp_cov = curvature_inverse(&ev.design, m, 13);
    for k in 0..13 {
        let name = if k < 12 {
            format!("amplitude_{}", k + 1)
        } else {
            "baseline".to_string()
        };
        let var = amp_cov.as_ref().map_or(T::nan(), |cov| cov[k * 13 + k] * s2);
        parameters.push(ParameterEstimate {
            name,
            value: ev.coefficients[k],
            sigma: var.max(T::zero()).sqrt(),
        });
    }

    FitReport {
        populations,
        polarization,
        amplitudes,
        baseline,
        lineshape: ev.lineshape,
        positions,
        residual_rms: (c::<T>(2.0) * ev.cost / T::from_usize_lossy(m)).sqrt(),
        parameters,
        converged,
        iterations,
        normalization_error,
        overlap_warning,
        cost_history,
    }
}

/// Noiseless twelve-line spectrum: every line carries the population of its
/// initial state times its strength, on top of a constant baseline.
pub fn synthesize<T: Real>(
    model: &FitModel<T>,
    populations: &[T; 4],
    baseline: T,
    energies: &[T],
) -> Result<Vec<T>, FitError> {
    let profile = CompositeProfile::new(&model.lineshape)?;
    Ok(energies
        .iter()
        .map(|&e| {
            let lines: T = (0..12)
                .map(|i| populations[model.states[i].index()] * model.strengths[i] * profile.eval(e - model.positions[i]))
                .sum();
            baseline + lines
        })
        .collect())
}

/// `(J^T J)^-1` for a column-major `m x p` Jacobian.
fn curvature_inverse<T: Real>(jac: &[T], m: usize, p: usize) -> Option<Vec<T>> {
    if jac.len() != m * p {
        return None;
    }
    let mut jtj = vec![T::zero(); p * p];
    for a in 0..p {
        for b in 0..p {
            jtj[a * p + b] = jac[a * m..(a + 1) * m]
                .iter()
                .zip(jac[b * m..(b + 1) * m].iter())
                .map(|(&x, &y)| x * y)
                .sum();
        }
    }
    invert_dense(&jtj, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_system::{transition_catalog, DonorParams, DxConfig};

    fn setup() -> (FitModel<f64>, Vec<f64>) {
        let donor = DonorParams::default();
        let catalog = transition_catalog(&donor, &DxConfig::default(), None).unwrap();
        let model = FitModel::from_catalog(&catalog, LineshapeModel::n_type());
        let (lo, hi) = catalog.span();
        let energies = (0..600).map(|i| lo - 150.0 + (hi - lo + 300.0) * i as f64 / 599.0).collect();
        (model, energies)
    }

    #[test]
    fn round_trip_from_exact_start() {
        let (model, energies) = setup();
        let signals = synthesize(&model, &[1.0, 4.0, 84.0, 11.0], 0.0, &energies).unwrap();
        let rep = fit_spectrum(&energies, &signals, &model, &FitOptions::default()).unwrap();
        let pops = rep.populations.unwrap();
        for (got, want) in pops.iter().zip([1.0, 4.0, 84.0, 11.0]) {
            assert!((got - want).abs() < 1e-4, "{pops:?}");
        }
        assert!(rep.converged);
    }

    #[test]
    fn round_trip_from_wrong_widths() {
        let (model, energies) = setup();
        let truth = [25.0, 25.0, 25.0, 25.0];
        let signals = synthesize(&model, &truth, 0.3, &energies).unwrap();
        let mut init = model.clone();
        init.lineshape.sigma_gauss *= 2.0;
        init.lineshape.gamma_hom *= 3.0;
        init.lineshape.tail_tau *= 0.5;
        let rep = fit_spectrum(&energies, &signals, &init, &FitOptions::default()).unwrap();
        let pops = rep.populations.unwrap();
        for p in pops {
            assert!((p - 25.0).abs() < 1e-2, "{pops:?}");
        }
        assert!((rep.baseline - 0.3).abs() < 1e-3);
    }

    #[test]
    fn zero_spectrum_flags_normalization() {
        let (model, energies) = setup();
        let rep = fit_spectrum(&energies, &vec![0.0; energies.len()], &model, &FitOptions::default()).unwrap();
        assert!(rep.amplitudes.iter().all(|a| *a == 0.0));
        assert!(rep.normalization_error);
        assert!(rep.populations.is_none());
    }

    #[test]
    fn scale_equivariance() {
        let (model, energies) = setup();
        let signals = synthesize(&model, &[44.0, 38.0, 4.0, 14.0], 0.0, &energies).unwrap();
        let a = fit_spectrum(&energies, &signals, &model, &FitOptions::default()).unwrap();
        let scaled: Vec<f64> = signals.iter().map(|s| s * 7.5).collect();
        let b = fit_spectrum(&energies, &scaled, &model, &FitOptions::default()).unwrap();
        for (x, y) in a.amplitudes.iter().zip(b.amplitudes.iter()) {
            assert!((x * 7.5 - y).abs() <= 1e-8 * y.abs().max(1.0));
        }
        for (x, y) in a.populations.unwrap().iter().zip(b.populations.unwrap().iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn cost_is_nonincreasing() {
        let (model, energies) = setup();
        let signals = synthesize(&model, &[3.0, 15.0, 43.0, 39.0], 0.0, &energies).unwrap();
        let mut init = model.clone();
        init.lineshape.sigma_gauss *= 0.4;
        init.refine_positions = true;
        let rep = fit_spectrum(&energies, &signals, &init, &FitOptions::default()).unwrap();
        assert!(rep.cost_history.len() > 1, "{:?} {} {}", rep.cost_history, rep.iterations, rep.converged);
        assert!(rep.cost_history.windows(2).all(|w| w[1] <= w[0]));
        let pops = rep.populations.unwrap();
        for (got, want) in pops.iter().zip([3.0, 15.0, 43.0, 39.0]) {
            assert!((got - want).abs() < 0.1, "{pops:?}");
        }
    }

    #[test]
    fn input_checks() {
        let (model, energies) = setup();
        assert!(matches!(
            fit_spectrum(&energies[..10], &[0.0; 10], &model, &FitOptions::default()),
            Err(FitError::TooFewPoints(10))
        ));
        assert!(matches!(
            fit_spectrum(&energies, &[0.0; 3], &model, &FitOptions::default()),
            Err(FitError::LengthMismatch { .. })
        ));
    }
}
