//! Correlated jamming: correlation schedules, covariance construction,
//! signal synthesis and the virtual-change factor between two covariances.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{pinv, psd_factor, svd, ComplexMatrix, Rng, DEFAULT_RCOND};
use crate::{Error, Result};

/// Correlations are capped at this magnitude when sampling so the jamming
/// covariance never becomes exactly singular.
pub const RHO_SAMPLING_CAP: f64 = 0.9999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleShape {
    Constant,
    /// Falls linearly from `rho_max` to `rho_min` within each period.
    SawtoothDown,
    SawtoothUp,
    /// Piecewise-constant values spread evenly over one period.
    Table {
        values: Vec<f64>,
    },
}

impl ScheduleShape {
    fn reversed(&self) -> ScheduleShape {
        match self {
            ScheduleShape::Constant => ScheduleShape::Constant,
            ScheduleShape::SawtoothDown => ScheduleShape::SawtoothUp,
            ScheduleShape::SawtoothUp => ScheduleShape::SawtoothDown,
            ScheduleShape::Table { values } => ScheduleShape::Table {
                values: values.iter().rev().copied().collect(),
            },
        }
    }
}

/// Correlation coefficient between jammer pairs as a function of the
/// absolute sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSchedule {
    shape: ScheduleShape,
    period: u64,
    rho_max: f64,
    rho_min: f64,
    switch_at: Option<u64>,
}

impl CorrelationSchedule {
    pub fn new(shape: ScheduleShape, period: u64, rho_max: f64, rho_min: f64) -> Result<Self> {
        if period == 0 {
            return Err(Error::Schedule("period must be positive".into()));
        }
        let in_range = |r: f64| r.is_finite() && (-1.0..=1.0).contains(&r);
        if !in_range(rho_max) || !in_range(rho_min) || rho_min > rho_max {
            return Err(Error::Schedule(format!(
                "need -1 <= rho_min <= rho_max <= 1, got [{rho_min}, {rho_max}]"
            )));
        }
        if let ScheduleShape::Table { values } = &shape {
            if values.is_empty() || !values.iter().all(|&r| in_range(r)) {
                return Err(Error::Schedule(
                    "table must be non-empty with |rho| <= 1".into(),
                ));
            }
        }
        Ok(CorrelationSchedule {
            shape,
            period,
            rho_max,
            rho_min,
            switch_at: None,
        })
    }

    pub fn constant(rho: f64) -> Result<Self> {
        Self::new(ScheduleShape::Constant, 1, rho, rho)
    }

    /// Reverses the schedule direction from sample `p` onwards, restarting
    /// the period there.
    pub fn with_switch(mut self, p: u64) -> Self {
        self.switch_at = Some(p);
        self
    }

    pub fn set_switch(&mut self, p: Option<u64>) {
        self.switch_at = p;
    }

    pub fn switch_at(&self) -> Option<u64> {
        self.switch_at
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn shape(&self) -> &ScheduleShape {
        &self.shape
    }

    pub fn rho_at(&self, p: u64) -> f64 {
        match self.switch_at {
            Some(s) if p >= s => self.eval(&self.shape.reversed(), p - s),
            _ => self.eval(&self.shape, p),
        }
    }

    fn eval(&self, shape: &ScheduleShape, p: u64) -> f64 {
        let phase = (p % self.period) as f64 / self.period as f64;
        let span = self.rho_max - self.rho_min;
        match shape {
            ScheduleShape::Constant => self.rho_max,
            ScheduleShape::SawtoothDown => self.rho_max - span * phase,
            ScheduleShape::SawtoothUp => self.rho_min + span * phase,
            ScheduleShape::Table { values } => {
                let i = ((phase * values.len() as f64) as usize).min(values.len() - 1);
                values[i]
            }
        }
    }
}

/// `Sigma_J` with `sigma_i^2` on the diagonal and `rho sigma_i sigma_j` off it.
pub fn build_sigma_j(variances: &[f64], rho: f64) -> Result<ComplexMatrix> {
    if variances.is_empty() {
        return Err(Error::Input("at least one jammer is required".into()));
    }
    if !variances.iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err(Error::Input("jammer variances must be non-negative".into()));
    }
    if !(rho.is_finite() && (-1.0..=1.0).contains(&rho)) {
        return Err(Error::Schedule(format!(
            "correlation {rho} outside [-1, 1]"
        )));
    }
    let n = variances.len();
    let sd: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let sigma = ComplexMatrix::from_fn(n, n, |i, j| {
        let v = if i == j {
            variances[i]
        } else {
            rho * (sd[i] * sd[j])
        };
        Complex64::new(v, 0.0)
    });
    // Equal pairwise correlation is only PSD for rho >= -1/(n-1).
    if n > 2 && rho < -1.0 / (n as f64 - 1.0) - 1e-12 {
        return Err(Error::NotPsd {
            eigenvalue: 1.0 + (n as f64 - 1.0) * rho,
            largest: 1.0 - rho,
        });
    }
    Ok(sigma)
}

/// Jammers transmitting zero-mean Gaussian signals whose pairwise
/// correlation follows a schedule.
#[derive(Debug, Clone)]
pub struct JammerModel {
    variances: Vec<f64>,
    schedule: CorrelationSchedule,
}

impl JammerModel {
    pub fn new(variances: Vec<f64>, schedule: CorrelationSchedule) -> Result<Self> {
        build_sigma_j(
            &variances,
            schedule
                .rho_at(0)
                .clamp(-RHO_SAMPLING_CAP, RHO_SAMPLING_CAP),
        )?;
        Ok(JammerModel {
            variances,
            schedule,
        })
    }

    pub fn n_jammers(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn schedule(&self) -> &CorrelationSchedule {
        &self.schedule
    }

    pub fn schedule_mut(&mut self) -> &mut CorrelationSchedule {
        &mut self.schedule
    }

    /// Correlation actually used for synthesis at sample `p`.
    pub fn effective_rho(&self, p: u64) -> f64 {
        self.schedule
            .rho_at(p)
            .clamp(-RHO_SAMPLING_CAP, RHO_SAMPLING_CAP)
    }

    pub fn sigma_at(&self, p: u64) -> Result<ComplexMatrix> {
        build_sigma_j(&self.variances, self.effective_rho(p))
    }

    /// `n` jamming vectors (columns) at samples `p0, p0 + stride, ...`.
    pub fn sample_block(
        &self,
        rng: &mut Rng,
        p0: u64,
        n: usize,
        stride: u64,
    ) -> Result<ComplexMatrix> {
        let nj = self.n_jammers();
        let mut out = ComplexMatrix::zeros(nj, n);
        let mut cached: Option<(f64, ComplexMatrix)> = None;
        let mut z = vec![Complex64::new(0.0, 0.0); nj];
        for col in 0..n {
            let rho = self.effective_rho(p0 + col as u64 * stride);
            let fresh = !matches!(&cached, Some((r, _)) if *r == rho);
            if fresh {
                cached = Some((rho, psd_factor(&build_sigma_j(&self.variances, rho)?)?));
            }
            let l = &cached.as_ref().expect("factor cached").1;
            for zi in z.iter_mut() {
                *zi = rng.complex_normal();
            }
            for r in 0..nj {
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, zc) in z.iter().enumerate() {
                    acc += l[(r, c)] * zc;
                }
                out[(r, col)] = acc;
            }
        }
        Ok(out)
    }

    /// Covariance averaged over the samples `p0, p0 + stride, ...` (n of them).
    pub fn mean_sigma(&self, p0: u64, n: usize, stride: u64) -> Result<ComplexMatrix> {
        let nj = self.n_jammers();
        let mut acc = ComplexMatrix::zeros(nj, nj);
        for i in 0..n.max(1) {
            acc += self.sigma_at(p0 + i as u64 * stride)?;
        }
        Ok(acc / Complex64::new(n.max(1) as f64, 0.0))
    }
}

#[derive(Debug, Clone)]
pub struct VirtualChange {
    /// `D = V_d sqrt(S_d S_e^+) V_e^H`.
    pub d: ComplexMatrix,
    pub max_abs_entry: f64,
}

/// Factor mapping the jamming statistics seen during nullspace estimation to
/// those during data transmission, `Sigma_d = D Sigma_e D^H` when the
/// eigenvectors agree. Entries blow up as `Sigma_e` approaches singularity.
pub fn virtual_change_factor(
    sigma_e: &ComplexMatrix,
    sigma_d: &ComplexMatrix,
) -> Result<VirtualChange> {
    if sigma_e.shape() != sigma_d.shape() || !sigma_e.is_square() {
        return Err(Error::Shape(
            "covariances must be square and of equal size".into(),
        ));
    }
    let e = svd(sigma_e)?;
    let dd = svd(sigma_d)?;
    let s_e = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        e.s.len(),
        e.s.iter().map(|&s| Complex64::new(s, 0.0)),
    ));
    let s_e_pinv = pinv(&s_e, DEFAULT_RCOND)?;
    let mut scaled = dd.v.clone();
    for j in 0..dd.s.len() {
        let ratio = dd.s[j] * s_e_pinv[(j, j)].re;
        scaled.column_mut(j).scale_mut(ratio.max(0.0).sqrt());
    }
    let d = scaled * e.v.adjoint();
    let max_abs_entry = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(VirtualChange { d, max_abs_entry })
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::numerics::frobenius_sq;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn shape() -> impl Strategy<Value = ScheduleShape> {
        prop_oneof![
            Just(ScheduleShape::Constant),
            Just(ScheduleShape::SawtoothDown),
            Just(ScheduleShape::SawtoothUp),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn schedule_stays_in_range(
            shape in shape(),
            period in 1u64..10_000,
            lo in -1.0f64..1.0,
            width in 0.0f64..1.0,
            p: u32,
            switch in proptest::option::of(0u64..100_000),
        ) {
            let hi = (lo + width).min(1.0);
            let mut s = CorrelationSchedule::new(shape, period, hi, lo).unwrap();
            s.set_switch(switch);
            let rho = s.rho_at(u64::from(p));
            prop_assert!((lo..=hi).contains(&rho));
        }

        #[test]
        fn sigma_is_hermitian_and_factorable(
            vars in proptest::collection::vec(0.01f64..10.0, 2..4),
            rho in -0.49f64..=1.0,
        ) {
            let s = build_sigma_j(&vars, rho).unwrap();
            prop_assert_eq!(s.clone(), s.adjoint());
            let l = psd_factor(&s).unwrap();
            prop_assert!(frobenius_sq(&(&l * l.adjoint() - &s)).sqrt() < 1e-9 * frobenius_sq(&s).sqrt());
        }

        #[test]
        fn equal_statistics_give_identity_factor(seed: u64, n in 2usize..4) {
            let mut rng = Rng::new(seed);
            let a = ComplexMatrix::from_fn(n, n, |_, _| rng.complex_normal());
            let sigma = &a * a.adjoint() + ComplexMatrix::identity(n, n) * Complex64::new(0.01, 0.0);
            let d = virtual_change_factor(&sigma, &sigma).unwrap().d;
            prop_assert!(frobenius_sq(&(d - ComplexMatrix::identity(n, n))).sqrt() < 1e-9);
        }
    }
}
