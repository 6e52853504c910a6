//! Forward pass with Dempster-Shafer fusion and the three-part evidential
//! loss, with exact reverse-mode gradients.
//!
//! For each sample the loss sums a fused term, one term per present view and
//! a pseudo-view term. Each term is
//!
//! ```text
//! psi(S) - psi(alpha_y) + lambda_t * D(Dir(alpha~) || Dir(1, ..., 1))
//! ```
//!
//! where `psi(S) - psi(alpha_y)` is the cross-entropy integrated over
//! `Dir(alpha)` and `alpha~ = y + (1 - y) * alpha` removes the evidence of the
//! true class before the divergence to the uniform prior is taken.

use crate::dirichlet::DirichletParams;
use crate::divergence::{kl_dirichlet_grad_p, phd_closed_grad_p, HolderConfig};
use crate::error::{Error, Result};
use crate::evidence::{dirichlet_to_opinion, ds_combine_reduced, ds_combine_reduced_vjp, opinion_to_dirichlet, Opinion};
use crate::model::batch::MultiViewBatch;
use crate::model::network::{MultiViewModel, ViewActivations};
use crate::special::{psi, psi1};

/// Divergence used to pull off-label evidence towards the uniform prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    /// `KL(Dir(alpha~) || Dir(1))`
    Kl,
    /// Proper Hölder divergence on the label-masked concentration `alpha~`.
    Phd,
    /// Proper Hölder divergence on the raw concentration `alpha`.
    PhdUnmasked,
}

impl RegularizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegularizerKind::Kl => "kl",
            RegularizerKind::Phd => "phd",
            RegularizerKind::PhdUnmasked => "phd_unmasked",
        }
    }
}

impl std::str::FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(RegularizerKind::Kl),
            "phd" | "holder" | "holder_dir" => Ok(RegularizerKind::Phd),
            "phd_unmasked" | "holder_raw" => Ok(RegularizerKind::PhdUnmasked),
            other => Err(Error::Domain(format!("unknown regularizer `{other}`"))),
        }
    }
}

impl std::fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_label(d: &DirichletParams, y: usize) -> Result<()> {
    if y < d.classes() {
        Ok(())
    } else {
        Err(Error::Shape(format!("label {y} out of range for {} classes", d.classes())))
    }
}

/// `E_{mu ~ Dir(alpha)}[-log mu_y] = psi(S) - psi(alpha_y)`.
pub fn expected_cross_entropy(d: &DirichletParams, y: usize) -> Result<f64> {
    check_label(d, y)?;
    Ok(psi(d.strength()) - psi(d.alpha()[y]))
}

pub fn expected_cross_entropy_grad(d: &DirichletParams, y: usize) -> Result<(f64, Vec<f64>)> {
    let value = expected_cross_entropy(d, y)?;
    let ts = psi1(d.strength());
    let mut grad = vec![ts; d.classes()];
    grad[y] -= psi1(d.alpha()[y]);
    Ok((value, grad))
}

/// `alpha~ = y + (1 - y) * alpha` with `y` one-hot.
pub fn label_masked(d: &DirichletParams, y: usize) -> Result<DirichletParams> {
    check_label(d, y)?;
    let mut a = d.alpha().to_vec();
    a[y] = 1.0;
    DirichletParams::new(a)
}

/// Divergence of the (masked) concentration from `Dir(1, ..., 1)`.
pub fn regularizer(d: &DirichletParams, y: usize, kind: RegularizerKind, cfg: &HolderConfig) -> Result<f64> {
    regularizer_grad(d, y, kind, cfg).map(|(v, _)| v)
}

pub fn regularizer_grad(
    d: &DirichletParams,
    y: usize,
    kind: RegularizerKind,
    cfg: &HolderConfig,
) -> Result<(f64, Vec<f64>)> {
    let prior = DirichletParams::uniform(d.classes())?;
    match kind {
        RegularizerKind::Kl => {
            let masked = label_masked(d, y)?;
            let (v, mut g) = kl_dirichlet_grad_p(&masked, &prior)?;
            g[y] = 0.0;
            Ok((v, g))
        }
        RegularizerKind::Phd => {
            let masked = label_masked(d, y)?;
            let (v, mut g) = phd_closed_grad_p(cfg, &masked, &prior)?;
            g[y] = 0.0;
            Ok((v, g))
        }
        RegularizerKind::PhdUnmasked => {
            check_label(d, y)?;
            phd_closed_grad_p(cfg, d, &prior)
        }
    }
}

/// What the loss is built from, independent of the training schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub holder: HolderConfig,
    pub regularizer: RegularizerKind,
    /// Regularizer weight `lambda_t` in effect.
    pub lambda: f64,
}

/// Per-sample outputs of the forward pass.
#[derive(Debug, Clone)]
pub struct SampleOutput {
    /// `None` where the view is absent.
    pub views: Vec<Option<DirichletParams>>,
    pub fused: DirichletParams,
    pub fused_opinion: Opinion,
    /// Conflict of each pairwise fusion step.
    pub conflicts: Vec<f64>,
    pub pseudo: Option<DirichletParams>,
}

/// Mean loss components over the batch. Cross-entropy and regularizer parts
/// are reported unweighted; `total` applies `lambda_t`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub fused_ce: f64,
    pub fused_reg: f64,
    pub views_ce: f64,
    pub views_reg: f64,
    pub pseudo_ce: f64,
    pub pseudo_reg: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Name of the first non-finite component, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("fused_ce", self.fused_ce),
            ("fused_reg", self.fused_reg),
            ("views_ce", self.views_ce),
            ("views_reg", self.views_reg),
            ("pseudo_ce", self.pseudo_ce),
            ("pseudo_reg", self.pseudo_reg),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

#[derive(Debug, Clone)]
pub struct LossReport {
    pub loss: f64,
    pub breakdown: LossBreakdown,
    /// Gradient over [`MultiViewModel::params`], when requested.
    pub grad: Option<Vec<f64>>,
}

/// Everything the backward pass needs from one sample's forward pass.
struct SampleTrace {
    view_acts: Vec<Option<ViewActivations>>,
    /// Indices of present views, in fold order.
    order: Vec<usize>,
    /// Opinions of the present views, in fold order.
    opinions: Vec<Opinion>,
    /// Running fold results; `partial[j]` fuses `opinions[..=j]`.
    partial: Vec<Opinion>,
    conflicts: Vec<f64>,
    fused: DirichletParams,
    pseudo_input: Option<Vec<f64>>,
    pseudo_acts: Option<ViewActivations>,
}

fn check_batch(model: &MultiViewModel, batch: &MultiViewBatch) -> Result<()> {
    if batch.classes() != model.classes() {
        return Err(Error::Shape(format!(
            "batch has {} classes, model {}",
            batch.classes(),
            model.classes()
        )));
    }
    if batch.view_count() != model.views().len() {
        return Err(Error::Shape(format!(
            "batch has {} views, model {}",
            batch.view_count(),
            model.views().len()
        )));
    }
    for (m, (net, d)) in model.views().iter().zip(batch.view_dims()).enumerate() {
        if net.inputs() != d {
            return Err(Error::Shape(format!("view {m}: network takes {} features, batch has {d}", net.inputs())));
        }
    }
    Ok(())
}

fn trace_sample(model: &MultiViewModel, batch: &MultiViewBatch, i: usize) -> Result<SampleTrace> {
    let mut view_acts = Vec::with_capacity(batch.view_count());
    let mut order = Vec::new();
    let mut opinions = Vec::new();
    for (m, net) in model.views().iter().enumerate() {
        if batch.is_present(i, m) {
            let acts = net.forward(batch.view(m).row(i))?;
            opinions.push(dirichlet_to_opinion(&DirichletParams::new(acts.alpha.clone())?)?);
            order.push(m);
            view_acts.push(Some(acts));
        } else {
            view_acts.push(None);
        }
    }
    if opinions.is_empty() {
        return Err(Error::AllViewsMissing { sample: i });
    }
    let mut partial = vec![opinions[0].clone()];
    let mut conflicts = Vec::with_capacity(opinions.len() - 1);
    for op in &opinions[1..] {
        let f = ds_combine_reduced(partial.last().expect("non-empty"), op)?;
        conflicts.push(f.conflict);
        partial.push(f.opinion);
    }
    let fused = opinion_to_dirichlet(partial.last().expect("non-empty"))?;
    let (pseudo_input, pseudo_acts) = match model.pseudo() {
        Some(net) => {
            let x = batch.concatenated(i);
            let acts = net.forward(&x)?;
            (Some(x), Some(acts))
        }
        None => (None, None),
    };
    Ok(SampleTrace {
        view_acts,
        order,
        opinions,
        partial,
        conflicts,
        fused,
        pseudo_input,
        pseudo_acts,
    })
}

/// Per-view Dirichlets, the fused Dirichlet over present views and the
/// pseudo-view Dirichlet for every sample.
pub fn forward(model: &MultiViewModel, batch: &MultiViewBatch) -> Result<Vec<SampleOutput>> {
    check_batch(model, batch)?;
    (0..batch.len())
        .map(|i| {
            let t = trace_sample(model, batch, i)?;
            Ok(SampleOutput {
                views: t
                    .view_acts
                    .iter()
                    .map(|a| a.as_ref().map(|a| DirichletParams::new(a.alpha.clone())).transpose())
                    .collect::<Result<_>>()?,
                fused_opinion: t.partial.last().expect("non-empty").clone(),
                fused: t.fused,
                conflicts: t.conflicts,
                pseudo: t
                    .pseudo_acts
                    .map(|a| DirichletParams::new(a.alpha))
                    .transpose()?,
            })
        })
        .collect()
}

/// One loss term: value parts and `dL/dalpha` (lambda applied).
fn term(
    alpha: &DirichletParams,
    y: usize,
    obj: &Objective,
    want_grad: bool,
) -> Result<(f64, f64, Option<Vec<f64>>)> {
    let (ce, g_ce) = expected_cross_entropy_grad(alpha, y)?;
    if !want_grad {
        return Ok((ce, regularizer(alpha, y, obj.regularizer, &obj.holder)?, None));
    }
    let (reg, g_reg) = regularizer_grad(alpha, y, obj.regularizer, &obj.holder)?;
    let grad = want_grad.then(|| g_ce.iter().zip(&g_reg).map(|(a, b)| a + obj.lambda * b).collect());
    Ok((ce, reg, grad))
}

/// `dL/dalpha` given `dL/db`, `dL/du` of `b = (alpha - 1) / S`, `u = K / S`.
fn opinion_from_alpha_vjp(alpha: &[f64], grad_b: &[f64], grad_u: f64) -> Vec<f64> {
    let s: f64 = alpha.iter().sum();
    let k = alpha.len() as f64;
    let shared = (grad_b.iter().zip(alpha).map(|(g, a)| g * (a - 1.0)).sum::<f64>() + grad_u * k) / (s * s);
    grad_b.iter().map(|g| g / s - shared).collect()
}

/// `(dL/db, dL/du)` given `dL/dalpha` of `alpha = b K / u + 1`.
fn alpha_from_opinion_vjp(op: &Opinion, grad_alpha: &[f64]) -> (Vec<f64>, f64) {
    let k = op.classes() as f64;
    let u = op.uncertainty();
    let grad_b = grad_alpha.iter().map(|g| g * k / u).collect();
    let grad_u = -grad_alpha
        .iter()
        .zip(op.beliefs())
        .map(|(g, b)| g * b)
        .sum::<f64>()
        * k
        / (u * u);
    (grad_b, grad_u)
}

fn with_context(epoch: usize, sample: usize, term: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| Error::Loss {
        epoch,
        sample,
        term: term.to_string(),
        source: Box::new(e),
    }
}

/// Mean loss over the batch and, if `want_grad`, its exact gradient.
pub fn evaluate(
    model: &MultiViewModel,
    batch: &MultiViewBatch,
    obj: &Objective,
    epoch: usize,
    want_grad: bool,
) -> Result<LossReport> {
    check_batch(model, batch)?;
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let n = batch.len() as f64;
    let segments = model.segments();
    let mut grad = want_grad.then(|| vec![0.0; model.param_count()]);
    let mut sum = LossBreakdown::default();
    for i in 0..batch.len() {
        let y = batch.labels()[i];
        let t = trace_sample(model, batch, i)?;

        // fused term and its gradient back to each view's opinion
        let (ce, reg, g_fused) = term(&t.fused, y, obj, want_grad).map_err(with_context(epoch, i, "fused"))?;
        sum.fused_ce += ce;
        sum.fused_reg += reg;

        let mut grad_alpha: Vec<Option<Vec<f64>>> = vec![None; batch.view_count()];
        for (&m, op) in t.order.iter().zip(&t.opinions) {
            let acts = t.view_acts[m].as_ref().expect("present view has activations");
            let d = DirichletParams::new(acts.alpha.clone())?;
            let label = format!("view{m}");
            let (ce, reg, g) = term(&d, y, obj, want_grad).map_err(with_context(epoch, i, &label))?;
            sum.views_ce += ce;
            sum.views_reg += reg;
            grad_alpha[m] = g;
            debug_assert_eq!(op.classes(), model.classes());
        }

        if let Some(g_fused) = g_fused {
            let (mut gb, mut gu) = alpha_from_opinion_vjp(t.partial.last().expect("non-empty"), &g_fused);
            for j in (1..t.opinions.len()).rev() {
                let (gb_prev, gu_prev, gb_j, gu_j) =
                    ds_combine_reduced_vjp(&t.partial[j - 1], &t.opinions[j], &gb, gu)?;
                let m = t.order[j];
                let alpha = &t.view_acts[m].as_ref().expect("present").alpha;
                let extra = opinion_from_alpha_vjp(alpha, &gb_j, gu_j);
                add_into(grad_alpha[m].as_mut().expect("gradient requested"), &extra);
                gb = gb_prev;
                gu = gu_prev;
            }
            let m = t.order[0];
            let alpha = &t.view_acts[m].as_ref().expect("present").alpha;
            let extra = opinion_from_alpha_vjp(alpha, &gb, gu);
            add_into(grad_alpha[m].as_mut().expect("gradient requested"), &extra);
        }

        if let Some(acts) = &t.pseudo_acts {
            let d = DirichletParams::new(acts.alpha.clone())?;
            let (ce, reg, g) = term(&d, y, obj, want_grad).map_err(with_context(epoch, i, "pseudo"))?;
            sum.pseudo_ce += ce;
            sum.pseudo_reg += reg;
            if let (Some(g), Some(full)) = (g, grad.as_mut()) {
                let seg = segments.last().expect("pseudo segment").clone();
                let net = model.pseudo().expect("pseudo network");
                let x = t.pseudo_input.as_ref().expect("pseudo input");
                net.backward(x, acts, &scale(&g, 1.0 / n), &mut full[seg]);
            }
        }

        if let Some(full) = grad.as_mut() {
            for (m, g) in grad_alpha.iter().enumerate() {
                if let (Some(g), Some(acts)) = (g, &t.view_acts[m]) {
                    let seg = segments[m].clone();
                    model.views()[m].backward(batch.view(m).row(i), acts, &scale(g, 1.0 / n), &mut full[seg]);
                }
            }
        }
    }
    let mean = LossBreakdown {
        fused_ce: sum.fused_ce / n,
        fused_reg: sum.fused_reg / n,
        views_ce: sum.views_ce / n,
        views_reg: sum.views_reg / n,
        pseudo_ce: sum.pseudo_ce / n,
        pseudo_reg: sum.pseudo_reg / n,
        total: 0.0,
    };
    let total = mean.fused_ce
        + mean.views_ce
        + mean.pseudo_ce
        + obj.lambda * (mean.fused_reg + mean.views_reg + mean.pseudo_reg);
    Ok(LossReport {
        loss: total,
        breakdown: LossBreakdown { total, ..mean },
        grad,
    })
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
}

fn scale(x: &[f64], s: f64) -> Vec<f64> {
    x.iter().map(|v| v * s).collect()
}
