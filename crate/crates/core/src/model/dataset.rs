use std::fmt::Write as _;
use std::io::Read;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("column lengths differ: z={z}, d={d}, y={y}, x={x:?}")]
    LengthMismatch { z: usize, d: usize, y: usize, x: Option<usize> },
    #[error("unit {unit}: {column} must be 0 or 1, got {value}")]
    NonBinary { unit: usize, column: &'static str, value: String },
    #[error("unit {unit}: received treatment while assigned to control (one-sided noncompliance violated)")]
    OneSidedViolation { unit: usize },
    #[error("unit {unit}: {column} is not finite")]
    NonFinite { unit: usize, column: &'static str },
    #[error("need at least one treated and one control unit, got n={n}, n_t={n_t}")]
    DegenerateArms { n: usize, n_t: usize },
    #[error("csv: {0}")]
    Csv(String),
}

/// One randomized experiment with one-sided noncompliance, as the analyst
/// sees it. Construct through [`ObservedDataset::new`] or [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDataset {
    z: Vec<u8>,
    d: Vec<u8>,
    y: Vec<f64>,
    x: Option<Vec<f64>>,
    n_t: usize,
}

impl ObservedDataset {
    pub fn new(z: Vec<u8>, d: Vec<u8>, y: Vec<f64>, x: Option<Vec<f64>>) -> Result<Self, DatasetError> {
        let n = z.len();
        if d.len() != n || y.len() != n || x.as_ref().is_some_and(|x| x.len() != n) {
            return Err(DatasetError::LengthMismatch { z: n, d: d.len(), y: y.len(), x: x.as_ref().map(Vec::len) });
        }
        for i in 0..n {
            if z[i] > 1 {
                return Err(DatasetError::NonBinary { unit: i, column: "z", value: z[i].to_string() });
            }
            if d[i] > 1 {
                return Err(DatasetError::NonBinary { unit: i, column: "d", value: d[i].to_string() });
            }
            if z[i] == 0 && d[i] == 1 {
                return Err(DatasetError::OneSidedViolation { unit: i });
            }
            if !y[i].is_finite() {
                return Err(DatasetError::NonFinite { unit: i, column: "y" });
            }
            if let Some(x) = &x {
                if !x[i].is_finite() {
                    return Err(DatasetError::NonFinite { unit: i, column: "x" });
                }
            }
        }
        let n_t = z.iter().filter(|&&v| v == 1).count();
        if n_t == 0 || n_t == n {
            return Err(DatasetError::DegenerateArms { n, n_t });
        }
        Ok(Self { z, d, y, x, n_t })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    pub fn d(&self) -> &[u8] {
        &self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> Option<&[f64]> {
        self.x.as_deref()
    }

    /// Share of treated units that took the treatment; estimates the
    /// complier proportion under randomization.
    pub fn treated_uptake(&self) -> f64 {
        let takers = self.z.iter().zip(&self.d).filter(|(&z, &d)| z == 1 && d == 1).count();
        takers as f64 / self.n_t as f64
    }

    /// Writes the dataset as `z,d,y[,x]` CSV. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.n() * 24);
        out.push_str(if self.x.is_some() { "z,d,y,x\n" } else { "z,d,y\n" });
        for i in 0..self.n() {
            write!(out, "{},{},{:?}", self.z[i], self.d[i], self.y[i]).unwrap();
            if let Some(x) = &self.x {
                write!(out, ",{:?}", x[i]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| DatasetError::Csv(e.to_string()))?.clone();
        let cols: Vec<&str> = header.iter().collect();
        let has_x = match cols.as_slice() {
            ["z", "d", "y"] => false,
            ["z", "d", "y", "x"] => true,
            _ => return Err(DatasetError::Csv(format!("expected header z,d,y[,x], got {}", cols.join(",")))),
        };
        let (mut z, mut d, mut y) = (Vec::new(), Vec::new(), Vec::new());
        let mut x = has_x.then(Vec::new);
        for (unit, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| DatasetError::Csv(e.to_string()))?;
            z.push(parse_binary(unit, "z", &rec[0])?);
            d.push(parse_binary(unit, "d", &rec[1])?);
            y.push(parse_real(unit, "y", &rec[2])?);
            if let Some(x) = &mut x {
                x.push(parse_real(unit, "x", &rec[3])?);
            }
        }
        Self::new(z, d, y, x)
    }

    pub fn from_csv_str(s: &str) -> Result<Self, DatasetError> {
        Self::from_csv_reader(s.as_bytes())
    }
}

fn parse_binary(unit: usize, column: &'static str, field: &str) -> Result<u8, DatasetError> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(DatasetError::NonBinary { unit, column, value: other.to_owned() }),
    }
}

fn parse_real(unit: usize, column: &'static str, field: &str) -> Result<f64, DatasetError> {
    let v: f64 =
        field.parse().map_err(|_| DatasetError::Csv(format!("unit {unit}: cannot parse {column}={field:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DatasetError::NonFinite { unit, column })
    }
}

/// Validates raw columns. Assignment and receipt arrive as reals so that
/// values like `2` or `0.5` are reported rather than silently truncated.
pub fn validate_dataset(z: &[f64], d: &[f64], y: &[f64], x: Option<&[f64]>) -> Result<ObservedDataset, DatasetError> {
    let n = z.len();
    if d.len() != n || y.len() != n || x.is_some_and(|x| x.len() != n) {
        return Err(DatasetError::LengthMismatch { z: n, d: d.len(), y: y.len(), x: x.map(<[f64]>::len) });
    }
    let to_bin = |col: &[f64], name: &'static str| -> Result<Vec<u8>, DatasetError> {
        col.iter()
            .enumerate()
            .map(|(i, &v)| match v {
                0.0 => Ok(0),
                1.0 => Ok(1),
                v => Err(DatasetError::NonBinary { unit: i, column: name, value: v.to_string() }),
            })
            .collect()
    };
    ObservedDataset::new(to_bin(z, "z")?, to_bin(d, "d")?, y.to_vec(), x.map(<[f64]>::to_vec))
}

/// Per-unit complier (1) / never-taker (0) labels. Treated units always
/// carry their revealed type `d_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplianceVector(Vec<u8>);

impl ComplianceVector {
    /// Labels with treated units fixed to `d` and control units set by `fill`.
    pub fn from_dataset(data: &ObservedDataset, mut fill: impl FnMut(usize) -> bool) -> Self {
        let c = (0..data.n()).map(|i| if data.z()[i] == 1 { data.d()[i] } else { u8::from(fill(i)) }).collect();
        Self(c)
    }

    /// Wraps raw labels without reference to a dataset (oracles, known truth).
    pub fn from_labels(c: Vec<u8>) -> Self {
        debug_assert!(c.iter().all(|&v| v <= 1));
        Self(c)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn compliers(&self) -> usize {
        self.0.iter().filter(|&&c| c == 1).count()
    }

    pub fn is_consistent_with(&self, data: &ObservedDataset) -> bool {
        self.len() == data.n() && (0..data.n()).all(|i| data.z()[i] == 0 || self.0[i] == data.d()[i])
    }

    pub(crate) fn set(&mut self, i: usize, complier: bool) {
        self.0[i] = u8::from(complier);
    }
}
