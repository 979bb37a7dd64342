use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Point};

const MAGIC: &str = "# plasma2d-checkpoint v1";

/// One stored configuration with the parameters that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub n: usize,
    pub beta: f64,
    /// `canonical-f`, `pure-quadratic` or `ginibre`.
    pub ensemble: String,
    pub sweep: u64,
    pub seed: u64,
    pub config: Configuration,
}

impl Checkpoint {
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "{MAGIC}, N={}, beta={}, ensemble={}, sweep={}, seed={}\n",
            self.n, self.beta, self.ensemble, self.sweep, self.seed
        );
        for p in &self.config {
            writeln!(s, "{},{}", p.x, p.y).expect("string write");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::CorruptCheckpoint(m.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let rest = header.strip_prefix(MAGIC).ok_or_else(|| bad("missing header"))?;
        let mut n = None;
        let mut beta = None;
        let mut ensemble = None;
        let mut sweep = None;
        let mut seed = None;
        for field in rest.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            let (k, v) = field.split_once('=').ok_or_else(|| bad("malformed header field"))?;
            match k {
                "N" => n = v.parse::<usize>().ok(),
                "beta" => beta = v.parse::<f64>().ok(),
                "ensemble" => ensemble = Some(v.to_string()),
                "sweep" => sweep = v.parse::<u64>().ok(),
                "seed" => seed = v.parse::<u64>().ok(),
                _ => return Err(bad("unknown header field")),
            }
        }
        let n = n.ok_or_else(|| bad("header lacks N"))?;
        let mut points = Vec::with_capacity(n);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (x, y) = line.split_once(',').ok_or_else(|| bad("malformed row"))?;
            let x: f64 = x.trim().parse().map_err(|_| bad("malformed x"))?;
            let y: f64 = y.trim().parse().map_err(|_| bad("malformed y"))?;
            points.push(Point::new(x, y));
        }
        if points.len() != n {
            return Err(bad(&format!("expected {n} rows, found {}", points.len())));
        }
        Ok(Checkpoint {
            n,
            beta: beta.ok_or_else(|| bad("header lacks beta"))?,
            ensemble: ensemble.ok_or_else(|| bad("header lacks ensemble"))?,
            sweep: sweep.ok_or_else(|| bad("header lacks sweep"))?,
            seed: seed.ok_or_else(|| bad("header lacks seed"))?,
            config: Configuration::new(points).map_err(|e| bad(&e.to_string()))?,
        })
    }

    /// Writes through a temporary file and a rename, so a reader never sees
    /// a partial checkpoint.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension(format!("csv.{}.tmp", std::process::id()));
        fs::write(&tmp, self.to_csv())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::CorruptCheckpoint(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }
}
