use std::collections::BTreeMap;

use rand::RngCore;

use super::{check_position, count_nonzero, RadiusModel, VectorLayer};
use crate::error::Result;
use crate::priors::BaseDistribution;
use crate::sampler::{Draw, Model, Target};

/// The projected prior with no likelihood; chains should reproduce the
/// closed-form cardinality laws.
///
/// Position layout: `[β (p), radius (0 or 1)]`.
#[derive(Debug, Clone)]
pub struct PriorOnlyModel {
    base: BaseDistribution,
    radius: RadiusModel,
}

impl PriorOnlyModel {
    pub fn new(base: BaseDistribution, radius: RadiusModel) -> Result<Self> {
        radius.validate()?;
        Ok(Self { base, radius })
    }
}

struct PriorTarget<'a> {
    model: &'a PriorOnlyModel,
}

impl Target for PriorTarget<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (beta, u) = q.split_at(m.base.dim());
        m.base.grad_log_density(beta, &mut grad[..beta.len()])?;
        let radius = m.radius.eval(u);
        if !u.is_empty() {
            grad[beta.len()] = radius.grad;
        }
        Ok(m.base.log_density(beta)? + radius.log_density)
    }

    fn draw(&mut self, q: &[f64]) -> Result<Draw> {
        check_position(q, self.dim())?;
        let m = self.model;
        let (beta, u) = q.split_at(m.base.dim());
        let layer = VectorLayer::new(beta, &m.radius, u)?;
        let mut extras = BTreeMap::new();
        extras.insert("cardinality".into(), count_nonzero(&layer.point.theta) as f64);
        if let Some(mu) = layer.mu_tilde {
            extras.insert("w".into(), layer.radius.value);
            extras.insert("mu_tilde".into(), mu);
        }
        Ok(Draw { beta: beta.to_vec(), theta: layer.point.theta, r: layer.r, extras })
    }
}

impl Model for PriorOnlyModel {
    fn name(&self) -> &str {
        "prior"
    }

    fn dim(&self) -> usize {
        self.base.dim() + self.radius.n_params()
    }

    fn make_target(&self) -> Result<Box<dyn Target + '_>> {
        Ok(Box::new(PriorTarget { model: self }))
    }

    /// A draw from the base and, when random, from the radius prior.
    fn initial_position(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut q = self.base.sample(rng);
        if let RadiusModel::Random(prior) = &self.radius {
            q.extend(self.radius.init(prior.sample(rng)));
        }
        q
    }
}
