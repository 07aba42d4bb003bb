use std::io::{self, Write};

use super::{ElementRef, PowerGridNetlist};

/// Shortest decimal that parses back to exactly `v`.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes the netlist in the parser's grammar, preserving element order.
pub fn write_netlist<W: Write>(netlist: &PowerGridNetlist, mut out: W) -> io::Result<()> {
    let name = |id| netlist.node(id).name.as_str();
    for el in netlist.element_order() {
        match *el {
            ElementRef::Resistor(i) => {
                let r = &netlist.resistors()[i];
                writeln!(out, "{} {} {} {}", r.name, name(r.a), name(r.b), format_value(r.resistance))?;
            }
            ElementRef::Pad(i) => {
                let p = &netlist.pads()[i];
                writeln!(out, "{} {} 0 {}", p.name, name(p.node), format_value(p.volts))?;
            }
            ElementRef::Load(i) => {
                let l = &netlist.loads()[i];
                writeln!(out, "{} {} 0 {}", l.name, name(l.node), format_value(l.amps))?;
            }
        }
    }
    writeln!(out, ".op")?;
    writeln!(out, ".end")
}

pub fn write_string(netlist: &PowerGridNetlist) -> String {
    let mut buf = Vec::new();
    write_netlist(netlist, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("netlist text is utf-8")
}
