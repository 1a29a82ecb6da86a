use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use super::data::{CollectedData, HankelSet};
use super::problem::{command_from_plan, deepc_rhs, ControlCommand, DeepcParams, DeepcStructure};
use crate::error::{Error, Result};
use crate::qp::{QSolution, QpSettings, QpStatus, QpWorkspace};

/// Residual bound under which an iteration-capped solve is still used.
pub const RELAXED_RESIDUAL: f64 = 1e-3;

/// Data, hyperparameters and cached factorisations. Immutable once built
/// and shared between controllers.
#[derive(Debug)]
pub struct DeepcModel {
    hankels: HankelSet,
    params: DeepcParams,
    structure: DeepcStructure,
    workspace: QpWorkspace,
    settings: QpSettings,
}

impl DeepcModel {
    pub fn new(hankels: HankelSet, params: DeepcParams, settings: QpSettings) -> Result<Self> {
        let structure = DeepcStructure::new(&hankels, &params)?;
        let workspace = QpWorkspace::new(structure.hessian.clone(), structure.a_eq.clone(), structure.g.clone())?;
        if workspace.eq_rank() < workspace.eq_rows() {
            log::debug!(
                "{} of {} equality rows are linearly dependent",
                workspace.eq_rows() - workspace.eq_rank(),
                workspace.eq_rows()
            );
        }
        Ok(DeepcModel {
            hankels,
            params,
            structure,
            workspace,
            settings,
        })
    }

    pub fn hankels(&self) -> &HankelSet {
        &self.hankels
    }

    pub fn params(&self) -> &DeepcParams {
        &self.params
    }

    pub fn regions(&self) -> usize {
        self.structure.regions
    }

    pub fn solve(
        &self,
        u_ini: &[f64],
        w_ini: &[f64],
        y_ini: &[f64],
        w_future: &[f64],
        e: &[f64],
    ) -> Result<QSolution> {
        let rhs = deepc_rhs(&self.hankels, &self.structure, &self.params, u_ini, w_ini, y_ini, w_future, e)?;
        self.workspace.solve(&rhs.c, rhs.constant, &rhs.b_eq, &rhs.h, &self.settings)
    }

    /// First-step input `U^f_0 g`.
    pub fn first_input(&self, g: &DVector<f64>) -> Vec<f64> {
        (0..self.hankels.m).map(|i| self.hankels.uf.row(i).dot(&g.transpose())).collect()
    }

    /// Predicted outputs `Y^f g`, step-major.
    pub fn predicted_outputs(&self, g: &DVector<f64>) -> Vec<f64> {
        (&self.hankels.yf * g).iter().copied().collect()
    }
}

/// One entry of the solver diagnostics log.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRecord {
    pub step: usize,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub fallback: bool,
}

impl fmt::Display for SolveRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step={} status={} iterations={} primal={:.3e} dual={:.3e} objective={:.6}{}",
            self.step,
            self.status,
            self.iterations,
            self.primal_residual,
            self.dual_residual,
            self.objective,
            if self.fallback { " fallback=stay" } else { "" }
        )
    }
}

/// Result of one solve before integer conversion.
#[derive(Debug, Clone)]
pub struct Plan {
    pub solution: QSolution,
    pub u_first: Vec<f64>,
}

/// Receding-horizon controller with rolling buffers of the last `T_ini`
/// measurements.
#[derive(Debug, Clone)]
pub struct DeepcController {
    model: Arc<DeepcModel>,
    u_buf: VecDeque<Vec<f64>>,
    w_buf: VecDeque<Vec<f64>>,
    y_buf: VecDeque<Vec<f64>>,
    pending: Option<Vec<f64>>,
    step: usize,
    log: Vec<SolveRecord>,
    planned_cost: f64,
}

impl DeepcController {
    /// Seeds the buffers with the tail of `history`.
    pub fn new(model: Arc<DeepcModel>, history: &CollectedData) -> Result<Self> {
        let t = model.params.t_ini;
        if history.len() < t {
            return Err(Error::TooShort {
                len: history.len(),
                needed: t,
            });
        }
        Self::from_buffers(model, history.u.tail(t), history.w.tail(t), history.y.tail(t))
    }

    pub fn from_buffers(
        model: Arc<DeepcModel>,
        u: Vec<Vec<f64>>,
        w: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let h = &model.hankels;
        let t = h.t_ini;
        for (name, buf, dim) in [("u", &u, h.m), ("w", &w, h.q), ("y", &y, h.p)] {
            if buf.len() != t || buf.iter().any(|s| s.len() != dim) {
                return Err(Error::Dimension(format!(
                    "{name} buffer must hold {t} samples of dimension {dim}"
                )));
            }
        }
        Ok(DeepcController {
            model,
            u_buf: u.into(),
            w_buf: w.into(),
            y_buf: y.into(),
            pending: None,
            step: 0,
            log: Vec::new(),
            planned_cost: 0.0,
        })
    }

    pub fn model(&self) -> &Arc<DeepcModel> {
        &self.model
    }

    fn flat(buf: &VecDeque<Vec<f64>>) -> Vec<f64> {
        buf.iter().flatten().copied().collect()
    }

    fn accept(solution: &QSolution) -> bool {
        match solution.status {
            QpStatus::Optimal => true,
            QpStatus::MaxIter => solution.max_residual() <= RELAXED_RESIDUAL,
            QpStatus::Infeasible => false,
        }
    }

    fn record(&mut self, solution: Option<&QSolution>, fallback: bool) {
        let rec = match solution {
            Some(s) => SolveRecord {
                step: self.step,
                status: s.status,
                iterations: s.iterations,
                primal_residual: s.primal_residual(),
                dual_residual: s.dual_residual(),
                objective: s.objective,
                fallback,
            },
            None => SolveRecord {
                step: self.step,
                status: QpStatus::Infeasible,
                iterations: 0,
                primal_residual: f64::NAN,
                dual_residual: f64::NAN,
                objective: f64::NAN,
                fallback,
            },
        };
        if fallback {
            log::warn!("deepc {rec}");
        } else {
            log::debug!("deepc {rec}");
        }
        self.log.push(rec);
    }

    /// Solves for the current buffers and stores the unrounded first-step
    /// input as the pending applied input. Logs exactly one record.
    pub fn plan(&mut self, w_future: &[f64], e: &[f64]) -> Result<Plan> {
        let result = self.model.solve(
            &Self::flat(&self.u_buf),
            &Self::flat(&self.w_buf),
            &Self::flat(&self.y_buf),
            w_future,
            e,
        );
        let outcome = match result {
            Err(err) => {
                self.record(None, true);
                Err(err)
            }
            Ok(solution) if !Self::accept(&solution) => {
                self.record(Some(&solution), true);
                Err(Error::Invariant(format!("qp returned {}", solution.status)))
            }
            Ok(solution) => {
                self.record(Some(&solution), false);
                let u_first = self.model.first_input(&solution.x);
                self.pending = Some(u_first.clone());
                Ok(Plan { solution, u_first })
            }
        };
        self.step += 1;
        outcome
    }

    /// One receding-horizon step with integer vehicle counts. Any failure
    /// falls back to keeping every vehicle in place.
    pub fn step(&mut self, w_future: &[f64], e: &[u32]) -> ControlCommand {
        let ef: Vec<f64> = e.iter().map(|&v| v as f64).collect();
        let command = match self.plan(w_future, &ef).and_then(|plan| command_from_plan(&plan.u_first, e)) {
            Ok(cmd) => cmd,
            Err(err) => {
                if let Some(last) = self.log.last_mut() {
                    last.fallback = true;
                }
                log::warn!("deepc step {} failed ({err}); all vehicles stay", self.step - 1);
                ControlCommand::stay(e)
            }
        };
        let applied = command.applied_input();
        self.planned_cost += applied
            .iter()
            .zip(&self.model.params.r_weight)
            .map(|(u, r)| u * r)
            .sum::<f64>();
        self.pending = Some(applied);
        command
    }

    /// Pushes the pending input with the measured disturbance and output.
    pub fn observe(&mut self, w: &[f64], y: &[f64]) -> Result<()> {
        let u = self
            .pending
            .take()
            .ok_or_else(|| Error::Invariant("observe called without a pending input".into()))?;
        let h = &self.model.hankels;
        if w.len() != h.q || y.len() != h.p {
            return Err(Error::Dimension(format!(
                "measurement lengths {} and {}, expected {} and {}",
                w.len(),
                y.len(),
                h.q,
                h.p
            )));
        }
        for (buf, v) in [(&mut self.u_buf, u), (&mut self.w_buf, w.to_vec()), (&mut self.y_buf, y.to_vec())] {
            buf.pop_front();
            buf.push_back(v);
        }
        Ok(())
    }

    /// Overrides the input recorded for the current step.
    pub fn set_applied_input(&mut self, u: Vec<f64>) {
        self.pending = Some(u);
    }

    pub fn diagnostics(&self) -> &[SolveRecord] {
        &self.log
    }

    /// Accumulated `Rw·u` over the inputs applied so far.
    pub fn rebalance_cost(&self) -> f64 {
        self.planned_cost
    }

    pub fn u_buffer(&self) -> Vec<Vec<f64>> {
        self.u_buf.iter().cloned().collect()
    }
}
