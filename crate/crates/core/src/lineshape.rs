//! Homogeneous and inhomogeneous line profiles, deterministic ensemble
//! discretization and the convolved (composite) line profile.
//!
//! The inhomogeneous distribution of line-center offsets is an
//! exponentially modified Gaussian whose exponential tail points to LOW
//! energy: `X = G - E` with `G ~ N(0, sigma^2)` and `E ~ Exp(mean tau)`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::real::{c, Real};

/// Composite FWHM of the n-type sample, MHz.
pub const NTYPE_COMPOSITE_FWHM_MHZ: f64 = 54.0;
/// Composite FWHM of the p-type samples, MHz.
pub const PTYPE_COMPOSITE_FWHM_MHZ: f64 = 37.0;
/// Default homogeneous (Lorentzian) FWHM, MHz.
pub const DEFAULT_GAMMA_HOM_MHZ: f64 = 2.0;
/// Gaussian sigma that gives the 54 MHz composite with the default
/// homogeneous width and no tail.
pub const NTYPE_SIGMA_MHZ: f64 = 22.4795;
/// Gaussian sigma that gives the 37 MHz composite.
pub const PTYPE_SIGMA_MHZ: f64 = 15.2559;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LineshapeError {
    #[error("invalid lineshape parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("composite profile is not unimodal ({maxima} local maxima)")]
    NotUnimodal { maxima: usize },
    #[error("unknown lineshape preset `{0}` (expected n-type or p-type)")]
    UnknownPreset(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineshapeModel<T> {
    /// Lorentzian FWHM, MHz.
    pub gamma_hom: T,
    /// Gaussian standard deviation of line-center offsets, MHz.
    pub sigma_gauss: T,
    /// Mean of the low-energy exponential tail, MHz (0 disables it).
    pub tail_tau: T,
    /// Power-broadening saturation parameter.
    pub saturation_s: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineshapePreset {
    #[serde(rename = "n-type")]
    NType,
    #[serde(rename = "p-type")]
    PType,
}

impl LineshapePreset {
    pub fn name(self) -> &'static str {
        match self {
            LineshapePreset::NType => "n-type",
            LineshapePreset::PType => "p-type",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, LineshapeError> {
        match name {
            "n-type" | "ntype" => Ok(LineshapePreset::NType),
            "p-type" | "ptype" => Ok(LineshapePreset::PType),
            other => Err(LineshapeError::UnknownPreset(other.to_string())),
        }
    }

    pub fn model<T: Real>(self) -> LineshapeModel<T> {
        let sigma = match self {
            LineshapePreset::NType => NTYPE_SIGMA_MHZ,
            LineshapePreset::PType => PTYPE_SIGMA_MHZ,
        };
        LineshapeModel {
            gamma_hom: c(DEFAULT_GAMMA_HOM_MHZ),
            sigma_gauss: c(sigma),
            tail_tau: T::zero(),
            saturation_s: T::zero(),
        }
    }
}

impl<T: Real> LineshapeModel<T> {
    pub fn n_type() -> Self {
        LineshapePreset::NType.model()
    }

    pub fn p_type() -> Self {
        LineshapePreset::PType.model()
    }

    pub fn validate(&self) -> Result<(), LineshapeError> {
        let bad = |name, value: T, reason| LineshapeError::InvalidParameter {
            name,
            value: value.as_f64(),
            reason,
        };
        if !self.gamma_hom.is_finite() || self.gamma_hom <= T::zero() {
            return Err(bad("gamma_hom", self.gamma_hom, "must be finite and > 0"));
        }
        if !self.sigma_gauss.is_finite() || self.sigma_gauss < T::zero() {
            return Err(bad("sigma_gauss", self.sigma_gauss, "must be finite and >= 0"));
        }
        if !self.tail_tau.is_finite() || self.tail_tau < T::zero() {
            return Err(bad("tail_tau", self.tail_tau, "must be finite and >= 0"));
        }
        if !self.saturation_s.is_finite() || self.saturation_s < T::zero() {
            return Err(bad("saturation_s", self.saturation_s, "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Saturation-broadened Lorentzian FWHM.
    pub fn effective_fwhm(&self) -> T {
        self.gamma_hom * (T::one() + self.saturation_s).sqrt()
    }

    pub fn is_inhomogeneous(&self) -> bool {
        self.sigma_gauss > T::zero() || self.tail_tau > T::zero()
    }

    /// Mean of the offset distribution.
    pub fn inhomogeneous_mean(&self) -> T {
        -self.tail_tau
    }

    pub fn inhomogeneous_std(&self) -> T {
        self.sigma_gauss.hypot(self.tail_tau)
    }

    /// Cumulative distribution of the offset distribution.
    pub fn inhomogeneous_cdf(&self, x: T) -> T {
        let (s, tau) = (self.sigma_gauss, self.tail_tau);
        let gauss_cdf = |x: T| {
            if s > T::zero() {
                c::<T>(0.5) * (-x / (s * T::SQRT_2())).erfc()
            } else if x >= T::zero() {
                T::one()
            } else {
                T::zero()
            }
        };
        if tau == T::zero() {
            return gauss_cdf(x);
        }
        (gauss_cdf(x) + tau * inhomogeneous_density(x, self)).min(T::one())
    }

    /// Offset of the maximum of the offset distribution.
    pub fn inhomogeneous_mode(&self) -> T {
        if self.tail_tau == T::zero() || self.sigma_gauss == T::zero() {
            return T::zero();
        }
        let mut lo = -(self.tail_tau + c::<T>(3.0) * self.sigma_gauss);
        let mut hi = c::<T>(3.0) * self.sigma_gauss;
        let ratio = c::<T>(0.5) * (c::<T>(5.0).sqrt() - T::one());
        for _ in 0..200 {
            let a = hi - ratio * (hi - lo);
            let b = lo + ratio * (hi - lo);
            if inhomogeneous_density(a, self) < inhomogeneous_density(b, self) {
                lo = a;
            } else {
                hi = b;
            }
            if hi - lo <= T::epsilon() * (T::one() + hi.abs()) {
                break;
            }
        }
        c::<T>(0.5) * (lo + hi)
    }

    /// Interval carrying all but a negligible part of the offset mass.
    fn support(&self) -> (T, T) {
        let s = self.sigma_gauss;
        let tau = self.tail_tau;
        (-(c::<T>(9.0) * s + c::<T>(36.0) * tau), c::<T>(9.0) * s)
    }
}

/// Peak-normalized Lorentzian of the saturation-broadened width.
pub fn homogeneous_profile<T: Real>(detuning: T, model: &LineshapeModel<T>) -> T {
    let u = c::<T>(2.0) * detuning / model.effective_fwhm();
    T::one() / (T::one() + u * u)
}

/// Large-argument expansion of `exp(x^2) erfc(x)`.
fn erfcx_asymptotic(x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    let series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2;
    series / (x * std::f64::consts::PI.sqrt())
}

/// Probability density (1/MHz) of line-center offsets.
pub fn inhomogeneous_density<T: Real>(offset: T, model: &LineshapeModel<T>) -> T {
    let (s, tau) = (model.sigma_gauss, model.tail_tau);
    if tau == T::zero() {
        if s == T::zero() {
            return if offset == T::zero() { T::infinity() } else { T::zero() };
        }
        let z = offset / s;
        return (-c::<T>(0.5) * z * z).exp() / (s * (T::TAU()).sqrt());
    }
    let lambda = T::one() / tau;
    if s == T::zero() {
        return if offset <= T::zero() { lambda * (lambda * offset).exp() } else { T::zero() };
    }
    // evaluated in f64; the exponential prefactor overflows f32 long before
    // the product does
    let (x, s, lambda) = (offset.as_f64(), s.as_f64(), lambda.as_f64());
    let b = (x + lambda * s * s) / (s * std::f64::consts::SQRT_2);
    let d = if b <= 0.0 {
        0.5 * lambda * (lambda * x + 0.5 * lambda * lambda * s * s).exp() * libm::erfc(b)
    } else {
        let erfcx = if b > 25.0 { erfcx_asymptotic(b) } else { (b * b).exp() * libm::erfc(b) };
        0.5 * lambda * (-x * x / (2.0 * s * s)).exp() * erfcx
    };
    T::lit(d)
}

/// One discrete sub-ensemble of donors sharing a line-center offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleClass<T> {
    /// MHz, added to every catalog line energy.
    pub detuning_offset: T,
    pub weight: T,
}

impl<T: Real> EnsembleClass<T> {
    pub fn single() -> Self {
        Self {
            detuning_offset: T::zero(),
            weight: T::one(),
        }
    }
}

const CLASS_GRID_CELLS: usize = 40_000;

/// Equal-probability-mass quadrature of the offset distribution. Each class
/// sits at the mass centroid of its bin and carries weight `1/n`. `n = 1`
/// (or a purely homogeneous model) yields the distribution mode.
pub fn sample_classes<T: Real>(n: usize, model: &LineshapeModel<T>) -> Vec<EnsembleClass<T>> {
    if n <= 1 || !model.is_inhomogeneous() {
        return vec![EnsembleClass {
            detuning_offset: model.inhomogeneous_mode(),
            weight: T::one(),
        }];
    }
    let (lo, hi) = model.support();
    let h = (hi - lo) / T::from_usize_lossy(CLASS_GRID_CELLS);
    let node = |i: usize| if i == CLASS_GRID_CELLS { hi } else { lo + h * T::from_usize_lossy(i) };

    // Cumulative mass and first moment at every grid node. The first moment
    // of a cell is b F(b) - a F(a) - int_a^b F, with Simpson for the integral.
    let mut mass = Vec::with_capacity(CLASS_GRID_CELLS + 1);
    let mut moment = Vec::with_capacity(CLASS_GRID_CELLS + 1);
    let f_lo = model.inhomogeneous_cdf(lo);
    mass.push(T::zero());
    moment.push(T::zero());
    let mut f_a = f_lo;
    for i in 0..CLASS_GRID_CELLS {
        let (a, b) = (node(i), node(i + 1));
        let f_b = model.inhomogeneous_cdf(b);
        let f_m = model.inhomogeneous_cdf(c::<T>(0.5) * (a + b));
        let int_f = (b - a) / c(6.0) * (f_a + c::<T>(4.0) * f_m + f_b);
        let m1 = b * f_b - a * f_a - int_f;
        mass.push(mass[i] + (f_b - f_a));
        moment.push(moment[i] + m1);
        f_a = f_b;
    }
    let total = mass[CLASS_GRID_CELLS];

    // Cumulative mass and moment at an arbitrary target mass fraction, with
    // uniform density inside the cell.
    let at_fraction = |q: T| -> T {
        let target = q * total;
        let idx = match mass.binary_search_by(|m| m.partial_cmp(&target).unwrap()) {
            Ok(i) => return moment[i],
            Err(i) => i.clamp(1, CLASS_GRID_CELLS),
        };
        let (m0, m1) = (mass[idx - 1], mass[idx]);
        let frac = if m1 > m0 { (target - m0) / (m1 - m0) } else { T::zero() };
        let a = node(idx - 1);
        let x = a + frac * h;
        // moment of the partial cell [a, x]
        moment[idx - 1] + (target - m0) * c::<T>(0.5) * (a + x)
    };

    let weight = T::one() / T::from_usize_lossy(n);
    let mut classes = Vec::with_capacity(n);
    let mut prev_moment = T::zero();
    for i in 1..=n {
        let q = T::from_usize_lossy(i) / T::from_usize_lossy(n);
        let m = if i == n { moment[CLASS_GRID_CELLS] } else { at_fraction(q) };
        let centroid = (m - prev_moment) / (weight * total);
        prev_moment = m;
        classes.push(EnsembleClass {
            detuning_offset: centroid,
            weight,
        });
    }
    classes
}

/// Tabulated, peak-normalized convolution of the offset distribution with
/// the homogeneous Lorentzian.
#[derive(Clone, Debug)]
pub struct CompositeProfile<T> {
    fwhm_l: T,
    start: T,
    step: T,
    values: Arc<Vec<T>>,
    far_centers: Arc<Vec<T>>,
    far_masses: Arc<Vec<T>>,
    norm: T,
    analytic: bool,
}

const MAX_TABLE: usize = 1 << 17;
const FAR_BINS: usize = 256;

impl<T: Real> CompositeProfile<T> {
    pub fn new(model: &LineshapeModel<T>) -> Result<Self, LineshapeError> {
        model.validate()?;
        let gl = model.effective_fwhm();
        if !model.is_inhomogeneous() {
            return Ok(Self {
                fwhm_l: gl,
                start: T::zero(),
                step: T::one(),
                values: Arc::new(Vec::new()),
                far_centers: Arc::new(Vec::new()),
                far_masses: Arc::new(Vec::new()),
                norm: T::one(),
                analytic: true,
            });
        }
        let (lo, hi) = model.support();
        let mut scale = gl;
        if model.sigma_gauss > T::zero() {
            scale = scale.min(c::<T>(2.3548) * model.sigma_gauss);
        }
        if model.tail_tau > T::zero() {
            scale = scale.min(model.tail_tau);
        }
        let start = lo - c::<T>(40.0) * gl;
        let stop = hi + c::<T>(40.0) * gl;
        let mut step = scale / c(16.0);
        let mut len = ((stop - start) / step).ceil().to_usize().unwrap_or(MAX_TABLE) + 1;
        if len > MAX_TABLE {
            len = MAX_TABLE;
            step = (stop - start) / T::from_usize_lossy(len - 1);
        }
        let x_at = |i: usize| start + step * T::from_usize_lossy(i);

        // exact mass per cell [x_i - h/2, x_i + h/2]
        let half = c::<T>(0.5) * step;
        let mut masses = Vec::with_capacity(len);
        let mut f_prev = model.inhomogeneous_cdf(x_at(0) - half);
        for i in 0..len {
            let f_next = model.inhomogeneous_cdf(x_at(i) + half);
            masses.push((f_next - f_prev).max(T::zero()));
            f_prev = f_next;
        }

        // cell-averaged Lorentzian kernel, indices -(len-1)..=(len-1)
        let kernel = |j: isize| -> T {
            let u = step * T::from_isize(j).unwrap();
            let two_over = c::<T>(2.0) / gl;
            let lo = ((u - half) * two_over).atan();
            let hi = ((u + half) * two_over).atan();
            c::<T>(0.5) * gl * (hi - lo) / step
        };
        let values = fft_convolve(&masses, len, kernel);

        // coarse bins for the far wings
        let per_bin = len.div_ceil(FAR_BINS);
        let mut far_centers = Vec::new();
        let mut far_masses = Vec::new();
        for chunk_start in (0..len).step_by(per_bin) {
            let chunk_end = (chunk_start + per_bin).min(len);
            let m: T = masses[chunk_start..chunk_end].iter().copied().sum();
            if m > T::zero() {
                let mx: T = (chunk_start..chunk_end).map(|i| masses[i] * x_at(i)).sum();
                far_centers.push(mx / m);
                far_masses.push(m);
            }
        }

        let mut profile = Self {
            fwhm_l: gl,
            start,
            step,
            values: Arc::new(values),
            far_centers: Arc::new(far_centers),
            far_masses: Arc::new(far_masses),
            norm: T::one(),
            analytic: false,
        };
        let (_, peak) = profile.peak();
        profile.norm = peak;
        Ok(profile)
    }

    fn table_len(&self) -> usize {
        self.values.len()
    }

    fn x_at(&self, i: usize) -> T {
        self.start + self.step * T::from_usize_lossy(i)
    }

    fn raw(&self, x: T) -> T {
        let pos = (x - self.start) / self.step;
        let n = self.table_len();
        if pos >= T::one() && pos <= T::from_usize_lossy(n - 3) {
            let i = pos.floor().to_usize().unwrap();
            let t = pos - T::from_usize_lossy(i);
            let v = &self.values;
            // Catmull-Rom
            let (p0, p1, p2, p3) = (v[i - 1], v[i], v[i + 1], v[i + 2]);
            let t2 = t * t;
            let t3 = t2 * t;
            let half = c::<T>(0.5);
            return half
                * (c::<T>(2.0) * p1
                    + (p2 - p0) * t
                    + (c::<T>(2.0) * p0 - c::<T>(5.0) * p1 + c::<T>(4.0) * p2 - p3) * t2
                    + (c::<T>(3.0) * (p1 - p2) + p3 - p0) * t3);
        }
        let two_over = c::<T>(2.0) / self.fwhm_l;
        self.far_centers
            .iter()
            .zip(self.far_masses.iter())
            .map(|(&xc, &m)| {
                let u = (x - xc) * two_over;
                m / (T::one() + u * u)
            })
            .sum()
    }

    /// Location and raw value of the maximum.
    fn peak(&self) -> (T, T) {
        if self.analytic {
            return (T::zero(), T::one());
        }
        let v = &self.values;
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |best, (i, &y)| if y > best.1 { (i, y) } else { best });
        let i = imax.clamp(1, v.len() - 2);
        let (ym, y0, yp) = (v[i - 1], v[i], v[i + 1]);
        let denom = ym - c::<T>(2.0) * y0 + yp;
        let shift = if denom < T::zero() {
            (c::<T>(0.5) * (ym - yp) / denom).max(-T::one()).min(T::one())
        } else {
            T::zero()
        };
        let xp = self.x_at(i) + shift * self.step;
        (xp, self.raw(xp).max(y0))
    }

    /// Profile value, 1 at the maximum.
    pub fn eval(&self, x: T) -> T {
        if self.analytic {
            let u = c::<T>(2.0) * x / self.fwhm_l;
            return T::one() / (T::one() + u * u);
        }
        self.raw(x) / self.norm
    }

    /// Offset of the profile maximum.
    pub fn peak_offset(&self) -> T {
        self.peak().0
    }

    /// Half-maximum points `(low, high)`.
    pub fn half_max_points(&self) -> Result<(T, T), LineshapeError> {
        if self.analytic {
            let hw = c::<T>(0.5) * self.fwhm_l;
            return Ok((-hw, hw));
        }
        let maxima = self.count_maxima();
        if maxima != 1 {
            return Err(LineshapeError::NotUnimodal { maxima });
        }
        let (xp, _) = self.peak();
        let half = c::<T>(0.5);
        let find = |dir: T| -> T {
            // march outward on the table, then bisect on the interpolant
            let mut inner = xp;
            let mut outer = xp + dir * self.step;
            while self.eval(outer) > half {
                inner = outer;
                outer = outer + dir * self.step;
            }
            for _ in 0..80 {
                let mid = c::<T>(0.5) * (inner + outer);
                if self.eval(mid) > half {
                    inner = mid;
                } else {
                    outer = mid;
                }
            }
            c::<T>(0.5) * (inner + outer)
        };
        Ok((find(-T::one()), find(T::one())))
    }

    fn count_maxima(&self) -> usize {
        let v = &self.values;
        let peak = v.iter().copied().fold(T::zero(), T::max);
        // transform round-off sits many orders below this
        let tol = peak * c(1e-10);
        let mut count = 0;
        let mut rising = true;
        for w in v.windows(2) {
            if w[1] > w[0] + tol {
                rising = true;
            } else if w[1] < w[0] - tol {
                if rising {
                    count += 1;
                }
                rising = false;
            }
        }
        count
    }

    pub fn fwhm(&self) -> Result<T, LineshapeError> {
        let (lo, hi) = self.half_max_points()?;
        Ok(hi - lo)
    }
}

/// Linear convolution `out_i = sum_j masses_j * kernel(i - j)` for
/// `i in 0..len`, via zero-padded FFT.
fn fft_convolve<T: Real>(masses: &[T], len: usize, kernel: impl Fn(isize) -> T) -> Vec<T> {
    let size = (2 * len).next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut a = vec![Complex::new(T::zero(), T::zero()); size];
    for (slot, &m) in a.iter_mut().zip(masses.iter()) {
        slot.re = m;
    }
    // kernel indices 0..len at the front, negative indices wrapped to the back
    let mut k = vec![Complex::new(T::zero(), T::zero()); size];
    for j in 0..len {
        k[j].re = kernel(j as isize);
        if j > 0 {
            k[size - j].re = kernel(-(j as isize));
        }
    }
    fwd.process(&mut a);
    fwd.process(&mut k);
    for (x, y) in a.iter_mut().zip(k.iter()) {
        *x = *x * *y;
    }
    inv.process(&mut a);
    let scale = T::one() / T::from_usize_lossy(size);
    a.iter().take(len).map(|z| (z.re * scale).max(T::zero())).collect()
}

/// FWHM of the homogeneous profile convolved with the offset distribution.
pub fn composite_fwhm<T: Real>(model: &LineshapeModel<T>) -> Result<T, LineshapeError> {
    CompositeProfile::new(model)?.fwhm()
}
