//! Per-UAV decision logic: accumulate the local objective from broadcast
//! contributions, fit a polynomial surrogate over a sliding window, and
//! pick the best feasible random perturbation under the surrogate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::constraints::{feasible, ClearanceRule, StepLimits};
use crate::error::CoreError;
use crate::geom::{Obstacle, Pose, Region};

pub const DEFAULT_DEGREE: u32 = 3;
pub const DEFAULT_WINDOW: usize = 30;
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-6;
pub const DEFAULT_PERTURBATIONS: usize = 40;

/// Shrinking perturbation scale: alpha(k) = max(initial - k/decay, floor).
/// The floor keeps the scale positive after the linear ramp runs out.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepSchedule {
    pub initial: f64,
    pub decay_steps: f64,
    pub floor: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            initial: 1.1,
            decay_steps: 300.0,
            floor: 0.05,
        }
    }
}

impl StepSchedule {
    pub fn alpha(&self, k: u64) -> f64 {
        (self.initial - k as f64 / self.decay_steps).max(self.floor)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.initial <= 0.0 || self.decay_steps <= 0.0 || self.floor <= 0.0 {
            return Err(CoreError::InvalidConfig(
                "step schedule parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Polynomial features over an encoded pose.
///
/// The pose is encoded as (x~, y~, cos yaw, sin yaw), with x~ and y~
/// affinely mapped to [-1, 1] by the region's bounding box so monomials
/// stay well conditioned. Yaw enters through its cosine and sine so the
/// features are continuous across the angle seam. The feature vector holds
/// every monomial of total degree <= `degree` over the four encoded
/// inputs, constant term first.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    x_min: f64,
    x_scale: f64,
    y_min: f64,
    y_scale: f64,
    exponents: Vec<[u32; 4]>,
}

impl FeatureMap {
    pub fn new(degree: u32, region: &Region) -> Self {
        let (min, max) = region.bounding_box();
        let mut exponents = Vec::new();
        for total in 0..=degree {
            for a in (0..=total).rev() {
                for b in (0..=total - a).rev() {
                    for c in (0..=total - a - b).rev() {
                        exponents.push([a, b, c, total - a - b - c]);
                    }
                }
            }
        }
        Self {
            x_min: min.x,
            x_scale: max.x - min.x,
            y_min: min.y,
            y_scale: max.y - min.y,
            exponents,
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    fn encode(&self, pose: &Pose) -> [f64; 4] {
        [
            2.0 * (pose.x - self.x_min) / self.x_scale - 1.0,
            2.0 * (pose.y - self.y_min) / self.y_scale - 1.0,
            pose.yaw.cos(),
            pose.yaw.sin(),
        ]
    }

    pub fn phi(&self, pose: &Pose) -> DVector<f64> {
        let u = self.encode(pose);
        DVector::from_iterator(
            self.exponents.len(),
            self.exponents.iter().map(|e| {
                u[0].powi(e[0] as i32)
                    * u[1].powi(e[1] as i32)
                    * u[2].powi(e[2] as i32)
                    * u[3].powi(e[3] as i32)
            }),
        )
    }
}

/// Sliding-window ridge regression of the local objective onto the
/// polynomial features.
#[derive(Debug, Clone)]
pub struct Estimator {
    features: FeatureMap,
    window: VecDeque<(Pose, f64)>,
    capacity: usize,
    ridge_lambda: f64,
    theta: DVector<f64>,
    local_objective: f64,
}

impl Estimator {
    pub fn new(features: FeatureMap, capacity: usize, ridge_lambda: f64) -> Self {
        let n = features.len();
        Self {
            features,
            window: VecDeque::with_capacity(capacity + 1),
            capacity,
            ridge_lambda,
            theta: DVector::zeros(n),
            local_objective: 0.0,
        }
    }

    pub fn local_objective(&self) -> f64 {
        self.local_objective
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// Fold one broadcast contribution into the running local objective and
    /// append the (pose, objective) pair, evicting beyond capacity.
    pub fn accumulate(&mut self, pose: Pose, delta: f64) {
        self.local_objective += delta;
        self.window.push_back((pose, self.local_objective));
        while self.window.len() > self.capacity {
            self.window.pop_front();
        }
    }

    /// Ridge least squares over the window, solved as the augmented system
    /// `[phi; sqrt(lambda) * I'] theta ~ [y; 0]` by SVD rather than through
    /// the normal equations: the feature set contains an exact dependency
    /// (1 = cos^2 + sin^2), so forming the Gram matrix would square an
    /// already large condition number.
    ///
    /// The penalty rows skip the constant feature, so adding a constant to
    /// every target shifts theta[0] by that constant and nothing else;
    /// selection by argmax is then offset-invariant. It also makes a
    /// single-sample fit interpolate exactly through the constant term.
    pub fn fit(&mut self) -> Result<(), CoreError> {
        if self.window.is_empty() {
            return Err(CoreError::Infeasible("cannot fit an empty window".into()));
        }
        let n = self.features.len();
        let w = self.window.len();
        let mut a = DMatrix::zeros(w + n - 1, n);
        let mut b = DVector::zeros(w + n - 1);
        for (row, (pose, value)) in self.window.iter().enumerate() {
            a.row_mut(row).copy_from(&self.features.phi(pose).transpose());
            b[row] = *value;
        }
        let sqrt_lambda = self.ridge_lambda.sqrt();
        for d in 1..n {
            a[(w + d - 1, d)] = sqrt_lambda;
        }
        let svd = a.svd(true, true);
        // Rank cutoff relative to the largest singular value; directions
        // below it are left at zero instead of exploding.
        let eps = svd.singular_values.max() * 1e-12;
        let theta = svd
            .solve(&b, eps)
            .map_err(|e| CoreError::Infeasible(format!("estimator fit failed: {e}")))?;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Infeasible("non-finite estimator coefficients".into()));
        }
        self.theta = theta;
        Ok(())
    }

    pub fn predict(&self, pose: &Pose) -> f64 {
        self.theta.dot(&self.features.phi(pose))
    }
}

/// One random step from `pose`: per-dimension uniform draws scaled by
/// `alpha`, then clamped so no scale can push past the hard step limits.
pub fn perturb_pose(pose: &Pose, alpha: f64, limits: &StepLimits, rng: &mut ChaCha8Rng) -> Pose {
    let mxy = limits.max_xy_step;
    let myaw = limits.max_yaw_step;
    let dx = (alpha * rng.random_range(-mxy..mxy)).clamp(-mxy, mxy);
    let dy = (alpha * rng.random_range(-mxy..mxy)).clamp(-mxy, mxy);
    let dyaw = (alpha * rng.random_range(-myaw..myaw)).clamp(-myaw, myaw);
    Pose::new(pose.x + dx, pose.y + dy, pose.yaw + dyaw)
}

/// m random candidate steps, preceded by the zero perturbation at index 0.
pub fn sample_perturbations(
    pose: &Pose,
    m: usize,
    alpha: f64,
    limits: &StepLimits,
    rng: &mut ChaCha8Rng,
) -> Vec<Pose> {
    let mut candidates = Vec::with_capacity(m + 1);
    candidates.push(*pose);
    for _ in 0..m {
        candidates.push(perturb_pose(pose, alpha, limits, rng));
    }
    candidates
}

/// Everything environment-side a decision needs, bundled to keep call
/// sites readable.
#[derive(Clone, Copy)]
pub struct DecisionContext<'a> {
    pub region: &'a Region,
    pub limits: &'a StepLimits,
    pub clearance: &'a ClearanceRule,
    pub obstacles: &'a [Obstacle],
    pub altitude: f64,
    pub alpha: f64,
    pub m: usize,
}

/// Outcome of one decision round.
#[derive(Debug, Clone, Copy)]
pub struct Decision {
    pub pose: Pose,
    /// Index into the sampled candidate list, 0 meaning "stay". None when
    /// every candidate was rejected or the estimator could not be fit.
    pub chosen_index: Option<usize>,
    pub rejected_count: usize,
}

impl Decision {
    fn hold(pose: Pose, rejected_count: usize) -> Self {
        Self {
            pose,
            chosen_index: None,
            rejected_count,
        }
    }
}

/// One UAV's optimizer: owns its estimator state; sees peers only as pose
/// snapshots handed in by the caller.
#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    estimator: Estimator,
}

impl Agent {
    pub fn new(id: usize, degree: u32, window: usize, ridge_lambda: f64, region: &Region) -> Self {
        Self {
            id,
            estimator: Estimator::new(FeatureMap::new(degree, region), window, ridge_lambda),
        }
    }

    pub fn local_objective(&self) -> f64 {
        self.estimator.local_objective()
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    /// Receive this step's broadcast contribution.
    pub fn record(&mut self, pose: Pose, delta: f64) {
        self.estimator.accumulate(pose, delta);
    }

    /// Fit the surrogate, sample perturbations, drop infeasible ones, and
    /// move to the surrogate argmax. Falls back to holding the pose when
    /// the fit fails or nothing is feasible. Ties break toward the lowest
    /// candidate index, so "stay" wins over an equal-scoring move.
    pub fn decide(
        &mut self,
        pose: &Pose,
        others: &[Pose],
        ctx: &DecisionContext,
        rng: &mut ChaCha8Rng,
    ) -> Decision {
        let candidates = sample_perturbations(pose, ctx.m, ctx.alpha, ctx.limits, rng);
        if self.estimator.window_len() == 0 || self.estimator.fit().is_err() {
            return Decision::hold(*pose, candidates.len());
        }
        let mut best: Option<(usize, f64)> = None;
        let mut rejected = 0;
        for (idx, cand) in candidates.iter().enumerate() {
            let ok = feasible(
                cand,
                pose,
                others,
                ctx.region,
                ctx.limits,
                ctx.clearance,
                ctx.obstacles,
                ctx.altitude,
            );
            if !ok {
                rejected += 1;
                continue;
            }
            let score = self.estimator.predict(cand);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((idx, score));
            }
        }
        match best {
            Some((idx, _)) => Decision {
                pose: candidates[idx],
                chosen_index: Some(idx),
                rejected_count: rejected,
            },
            None => Decision::hold(*pose, rejected),
        }
    }
}
