use std::io::{BufRead, Write};

use super::{ir_drop, GridSolution, SolverError};
use crate::netlist::{format_value, PowerGridNetlist};

/// Parsed solution file: `name voltage` lines and an optional
/// `worst_case <volts> [node]` trailer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionFile {
    pub voltages: Vec<(String, f64)>,
    pub worst_case: Option<(f64, Option<String>)>,
}

impl SolutionFile {
    /// Voltages ordered by the netlist's node ids. Ground may be omitted.
    pub fn voltages_for(&self, netlist: &PowerGridNetlist) -> Result<Vec<f64>, SolverError> {
        let mut out = vec![f64::NAN; netlist.nodes().len()];
        out[netlist.ground()] = 0.0;
        for (name, v) in &self.voltages {
            if let Some(id) = netlist.node_by_name(name) {
                out[id] = *v;
            }
        }
        if let Some(node) = netlist.nodes().iter().find(|n| out[n.id].is_nan()) {
            return Err(SolverError::MissingNode(node.name.clone()));
        }
        Ok(out)
    }
}

/// One line per non-ground node in id order, then the worst-case trailer.
pub fn write_solution<W: Write>(
    netlist: &PowerGridNetlist,
    solution: &GridSolution,
    mut out: W,
) -> std::io::Result<()> {
    for node in netlist.nodes().iter().filter(|n| !n.is_ground) {
        writeln!(out, "{} {}", node.name, format_value(solution.voltages[node.id]))?;
    }
    let drop = ir_drop(solution, netlist);
    match drop.worst_node {
        Some(id) => writeln!(out, "worst_case {} {}", format_value(drop.worst_case), netlist.node(id).name)?,
        None => writeln!(out, "worst_case 0")?,
    }
    Ok(())
}

pub fn read_solution<R: BufRead>(input: R) -> Result<SolutionFile, SolverError> {
    let mut file = SolutionFile::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() || fields[0].starts_with('*') {
            continue;
        }
        let bad = |reason: &str| SolverError::MalformedSolution {
            line: i + 1,
            reason: reason.to_string(),
        };
        let value = |s: &str| -> Result<f64, SolverError> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(&format!("invalid number `{s}`")))
        };
        if fields[0].eq_ignore_ascii_case("worst_case") {
            match fields.len() {
                2 => file.worst_case = Some((value(fields[1])?, None)),
                3 => file.worst_case = Some((value(fields[1])?, Some(fields[2].to_string()))),
                _ => return Err(bad("expected `worst_case <volts> [node]`")),
            }
            continue;
        }
        if fields.len() != 2 {
            return Err(bad("expected `<node> <volts>`"));
        }
        file.voltages.push((fields[0].to_string(), value(fields[1])?));
    }
    Ok(file)
}
