//! Resolving measurement and state arguments.

use std::path::Path;

use ebitloc::basis::BasisJson;
use ebitloc::catalog;
use ebitloc::linalg::MatrixJson;
use ebitloc::localizability::Scenario;
use ebitloc::protosim::InputState;
use ebitloc::{Error, MeasurementBasis, Result};

/// A measurement given as a catalog key, `crot:<theta>`, `bell:<d>` or a path to
/// a JSON basis file.
pub fn measurement(spec: &str) -> Result<MeasurementBasis> {
    let path = Path::new(spec);
    if path.is_file() {
        let json: BasisJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        return json.to_basis();
    }
    if let Some(theta) = spec.strip_prefix("crot:") {
        let theta = parse_angle(theta)?;
        return Ok(catalog::crot_basis(theta));
    }
    if let Some(d) = spec.strip_prefix("bell:") {
        let d = d.parse().map_err(|_| Error::InvalidArgument(format!("bad dimension `{d}`")))?;
        return catalog::bell_basis(d);
    }
    catalog::basis(spec)
}

/// Angles as plain radians or `pi/k`, `k*pi/m` shorthands.
pub fn parse_angle(s: &str) -> Result<f64> {
    let bad = || Error::InvalidArgument(format!("bad angle `{s}`"));
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a, b.parse::<f64>().map_err(|_| bad())?),
        None => (s, 1.0),
    };
    let coeff = match num.strip_suffix("pi") {
        Some("") => 1.0,
        Some(c) => c.trim_end_matches('*').parse::<f64>().map_err(|_| bad())?,
        None => return Err(bad()),
    };
    Ok(coeff * std::f64::consts::PI / den)
}

/// Scenario implied by explicit flags, else by the measurement's dimensions.
pub fn scenario(m: &MeasurementBasis, qudit: Option<usize>, parties: Option<usize>) -> Result<Scenario> {
    let s = match (qudit, parties) {
        (Some(_), Some(_)) => return Err(Error::InvalidArgument("--qudit and --parties are exclusive".into())),
        (Some(d), None) => Scenario::Qudit(d),
        (None, Some(2)) => Scenario::Bipartite,
        (None, Some(3)) => Scenario::Tripartite,
        (None, Some(p)) => return Err(Error::Unsupported(format!("{p} parties"))),
        (None, None) => match m.dims.as_slice() {
            [2, 2] => Scenario::Bipartite,
            [2, 2, 2] => Scenario::Tripartite,
            [a, b] if a == b => Scenario::Qudit(*a),
            other => return Err(Error::Unsupported(format!("dims {other:?}"))),
        },
    };
    if m.dims != s.dims() {
        return Err(Error::Dimension(format!("{:?} is not a {} measurement", m.dims, s.name())));
    }
    Ok(s)
}

/// A state vector (one column) or density matrix stored in the matrix JSON format.
pub fn state(path: &Path, order: usize) -> Result<InputState> {
    let json: MatrixJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let m = json.to_matrix()?;
    match (m.nrows(), m.ncols()) {
        (r, 1) if r == order => Ok(InputState::Pure(m.column(0).into_owned())),
        (r, c) if r == order && c == order => Ok(InputState::Mixed(m)),
        (r, c) => Err(Error::Dimension(format!("state of shape {r}x{c} for a measurement of order {order}"))),
    }
}
