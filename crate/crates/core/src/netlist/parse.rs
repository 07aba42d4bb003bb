use std::io::BufRead;

use super::{NetlistBuilder, NetlistError, PowerGridNetlist};

/// Parses a SPICE-subset power-grid netlist.
///
/// ```text
/// * comment
/// R<name> <node a> <node b> <ohms>
/// V<name> <node> 0 <volts>
/// I<name> <node> 0 <amps>
/// .op / .end
/// ```
///
/// Values are plain decimals or scientific notation. Magnitude suffixes
/// (`k`, `m`, `u`, ...) are rejected. Parsing stops at `.end`.
pub fn parse_netlist<R: BufRead>(reader: R) -> Result<PowerGridNetlist, NetlistError> {
    let mut builder = NetlistBuilder::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        if trimmed.starts_with('.') {
            if trimmed.eq_ignore_ascii_case(".end") {
                break;
            }
            continue;
        }
        parse_element(&mut builder, trimmed, line_no)?;
    }
    builder.build()
}

pub fn parse_str(text: &str) -> Result<PowerGridNetlist, NetlistError> {
    parse_netlist(text.as_bytes())
}

fn parse_element(builder: &mut NetlistBuilder, line: &str, line_no: usize) -> Result<(), NetlistError> {
    let malformed = |reason: String| NetlistError::MalformedLine { line: line_no, reason };
    let fields: Vec<&str> = line.split_whitespace().collect();
    let kind = fields[0].chars().next().map(|c| c.to_ascii_uppercase());
    if !matches!(kind, Some('R' | 'V' | 'I')) {
        return Err(malformed(format!("unsupported element `{}`", fields[0])));
    }
    if fields.len() != 4 {
        return Err(malformed(format!(
            "expected `<name> <node> <node> <value>`, got {} fields",
            fields.len()
        )));
    }
    let value = parse_value(fields[3]).map_err(malformed)?;
    builder.at_line(line_no);
    let (name, a, b) = (fields[0], fields[1], fields[2]);
    match kind {
        Some('R') => builder.resistor(name, a, b, value).map(drop),
        Some('V') => builder.pad(name, a, b, value).map(drop),
        Some('I') => builder.load(name, a, b, value).map(drop),
        _ => unreachable!(),
    }
    .map_err(|e| match e {
        NetlistError::InvalidValue { element, reason } => malformed(format!("{element}: {reason}")),
        other => other,
    })
}

fn parse_value(token: &str) -> Result<f64, String> {
    let numeric = token
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'));
    if !numeric {
        return Err(format!("`{token}` is not a plain decimal value"));
    }
    let v: f64 = token
        .parse()
        .map_err(|_| format!("`{token}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{token}` is not finite"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
R1 n1_0_0 n1_0_100 0.5
V1 n1_0_0 0 1.8
I1 n1_0_100 0 0.01
.end
";

    #[test]
    fn minimal_file() {
        let n = parse_str(MINIMAL).unwrap();
        let c = n.counts();
        assert_eq!((c.nodes, c.resistors, c.pads, c.loads), (2, 1, 1, 1));
        assert_eq!(n.nodes().len(), 3);
        let a = n.node(n.resistors()[0].a);
        assert_eq!(a.coord.unwrap().y, 0);
        assert_eq!(n.node(n.resistors()[0].b).coord.unwrap().y, 100);
        assert_eq!(n.vdd_nominal(), 1.8);
    }

    #[test]
    fn missing_node_is_malformed() {
        let err = parse_str("R1 n1_0_0 0.5\n").unwrap_err();
        assert!(matches!(err, NetlistError::MalformedLine { line: 1, .. }));
    }

    #[test]
    fn suffixes_are_rejected() {
        let err = parse_str("R1 a b 1k\nV1 a 0 1\n").unwrap_err();
        assert!(matches!(err, NetlistError::MalformedLine { line: 1, .. }));
        let err = parse_str("R1 a b inf\nV1 a 0 1\n").unwrap_err();
        assert!(matches!(err, NetlistError::MalformedLine { .. }));
    }

    #[test]
    fn scientific_and_case() {
        let n = parse_str("r1 a b 1.5E-3\nv1 a 0 1.8e0\ni1 b 0 2e-4\n").unwrap();
        assert_eq!(n.resistors()[0].resistance, 1.5e-3);
        assert_eq!(n.loads()[0].amps, 2e-4);
    }

    #[test]
    fn comments_directives_and_end() {
        let text = "* header\n.op\n\nR1 a b 1\nV1 a 0 1\n.END\nR2 a c 1\n";
        let n = parse_str(text).unwrap();
        assert_eq!(n.counts().resistors, 1);
    }

    #[test]
    fn duplicate_names() {
        let err = parse_str("R1 a b 1\nR1 b c 1\nV1 a 0 1\n").unwrap_err();
        assert!(matches!(err, NetlistError::DuplicateElementName { line: 2, .. }));
    }

    #[test]
    fn source_must_reference_ground() {
        let err = parse_str("R1 a b 1\nV1 a b 1\n").unwrap_err();
        assert!(matches!(err, NetlistError::DanglingNode { line: 2, .. }));
        let err = parse_str("R1 a b 1\nI1 0 a 1\n").unwrap_err();
        assert!(matches!(err, NetlistError::DanglingNode { .. }));
    }

    #[test]
    fn missing_ground() {
        assert!(matches!(parse_str("R1 a b 1\n"), Err(NetlistError::MissingGround)));
    }

    #[test]
    fn unsupported_element() {
        let err = parse_str("C1 a 0 1e-12\n").unwrap_err();
        assert!(matches!(err, NetlistError::MalformedLine { .. }));
    }
}
