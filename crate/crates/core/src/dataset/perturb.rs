use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::netlist::PowerGridNetlist;
use crate::solver::GridSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbTarget {
    BranchCurrent,
    NodeVoltage,
    SwitchingCurrent,
}

impl PerturbTarget {
    fn salt(self) -> u64 {
        match self {
            PerturbTarget::BranchCurrent => 0x9E37_79B9_7F4A_7C15,
            PerturbTarget::NodeVoltage => 0xC2B2_AE3D_27D4_EB4F,
            PerturbTarget::SwitchingCurrent => 0x1656_67B1_9E37_79F9,
        }
    }
}

impl std::str::FromStr for PerturbTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "branch_current" => Ok(PerturbTarget::BranchCurrent),
            "node_voltage" => Ok(PerturbTarget::NodeVoltage),
            "switching_current" => Ok(PerturbTarget::SwitchingCurrent),
            _ => Err(format!("unknown perturbation target `{s}`")),
        }
    }
}

/// Whether perturbed circuits are re-solved or the solution is edited directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    #[default]
    Resolve,
    InPlace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Bound of the uniform relative change, `0 ≤ γ ≤ 1`.
    pub gamma: f64,
    pub seed: u64,
    pub targets: Vec<PerturbTarget>,
    pub mode: PerturbMode,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            gamma: 0.10,
            seed: 0,
            targets: vec![PerturbTarget::SwitchingCurrent],
            mode: PerturbMode::Resolve,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(DatasetError::InvalidParameter(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.targets.is_empty() {
            return Err(DatasetError::InvalidParameter("no perturbation targets".into()));
        }
        Ok(())
    }

    fn has(&self, t: PerturbTarget) -> bool {
        self.targets.contains(&t)
    }

    /// Factors `1 + u`, `u ~ U[−γ, γ]`, from the target's own stream.
    fn factors(&self, target: PerturbTarget, n: usize) -> Vec<f64> {
        if self.gamma == 0.0 {
            return vec![1.0; n];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ target.salt());
        (0..n).map(|_| 1.0 + rng.random_range(-self.gamma..=self.gamma)).collect()
    }
}

// keeps rescaled resistances strictly positive at γ = 1
const MIN_FACTOR: f64 = 1e-6;

/// Perturbs the circuit inputs.
///
/// Loads scale by `1 + u`. A branch-current change is produced by dividing
/// the branch resistance by `1 + u`; a node-voltage change by scaling each
/// resistance with the mean draw of its two endpoints.
pub fn perturb(netlist: &PowerGridNetlist, spec: &PerturbationSpec) -> Result<PowerGridNetlist, DatasetError> {
    spec.validate()?;
    let invalid = |e: crate::netlist::NetlistError| DatasetError::InvalidParameter(e.to_string());
    let mut resistances: Vec<f64> = netlist.resistors().iter().map(|r| r.resistance).collect();
    let mut loads: Vec<f64> = netlist.loads().iter().map(|l| l.amps).collect();
    if spec.has(PerturbTarget::SwitchingCurrent) {
        for (l, f) in loads.iter_mut().zip(spec.factors(PerturbTarget::SwitchingCurrent, netlist.loads().len())) {
            *l *= f;
        }
    }
    if spec.has(PerturbTarget::BranchCurrent) {
        for (r, f) in resistances
            .iter_mut()
            .zip(spec.factors(PerturbTarget::BranchCurrent, netlist.resistors().len()))
        {
            *r /= f.max(MIN_FACTOR);
        }
    }
    if spec.has(PerturbTarget::NodeVoltage) {
        let f = spec.factors(PerturbTarget::NodeVoltage, netlist.nodes().len());
        for (r, branch) in resistances.iter_mut().zip(netlist.resistors()) {
            *r *= (0.5 * (f[branch.a] + f[branch.b])).max(MIN_FACTOR);
        }
    }
    netlist.with_values(Some(&resistances), Some(&loads)).map_err(invalid)
}

/// Perturbs solved quantities without re-solving: node drops and branch
/// currents scale by their own `1 + u`; loads are perturbed in the returned
/// netlist as in [`perturb`].
pub fn perturb_in_place(
    netlist: &PowerGridNetlist,
    solution: &GridSolution,
    spec: &PerturbationSpec,
) -> Result<(PowerGridNetlist, GridSolution), DatasetError> {
    spec.validate()?;
    let loads_only = PerturbationSpec {
        targets: vec![PerturbTarget::SwitchingCurrent],
        ..spec.clone()
    };
    let out_netlist = if spec.has(PerturbTarget::SwitchingCurrent) {
        perturb(netlist, &loads_only)?
    } else {
        netlist.clone()
    };
    let mut out = solution.clone();
    if spec.has(PerturbTarget::NodeVoltage) {
        let vdd = netlist.vdd_nominal();
        let pads = netlist.pad_per_node();
        let f = spec.factors(PerturbTarget::NodeVoltage, netlist.nodes().len());
        for (id, v) in out.voltages.iter_mut().enumerate() {
            if id != netlist.ground() && pads[id].is_none() {
                *v = vdd - (vdd - *v) * f[id];
            }
        }
    }
    if spec.has(PerturbTarget::BranchCurrent) {
        let f = spec.factors(PerturbTarget::BranchCurrent, out.branch_currents.len());
        for (i, f) in out.branch_currents.iter_mut().zip(f) {
            *i *= f;
        }
    }
    Ok((out_netlist, out))
}
