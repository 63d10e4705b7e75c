//! Per-animal position streams: CSV ingestion and gap filling.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Seconds.
    pub t: i64,
    pub x: f64,
    pub y: f64,
    pub imputed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub animal_id: String,
    /// Strictly increasing in `t`.
    pub samples: Vec<Sample>,
    /// Outages longer than the fill threshold, as `(last_before, first_after)`.
    pub gaps: Vec<(i64, i64)>,
}

impl Trajectory {
    pub fn new(animal_id: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let animal_id = animal_id.into();
        for w in samples.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::Validation(format!(
                    "animal {animal_id}: timestamps not strictly increasing ({} then {})",
                    w[0].t, w[1].t
                )));
            }
        }
        Ok(Trajectory {
            animal_id,
            samples,
            gaps: Vec::new(),
        })
    }
}

/// Parse the trajectory CSV (`animal_id,timestamp,x,y`). Rows may interleave
/// animals, but each animal's rows must have increasing timestamps. Returns
/// one trajectory per animal, ordered by `animal_id`.
pub fn parse_trajectories(text: &str) -> Result<Vec<Trajectory>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    if headers != vec!["animal_id", "timestamp", "x", "y"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `animal_id,timestamp,x,y`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut by_animal: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        let field = |i: usize, what: &str| -> Result<f64> {
            rec[i].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line,
                msg: format!("invalid {what} `{}`", &rec[i]),
            })
        };
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(Error::Parse { line, msg: "empty animal_id".into() });
        }
        let t: i64 = rec[1].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid timestamp `{}`", &rec[1]),
        })?;
        let x = field(2, "x")?;
        let y = field(3, "y")?;
        let samples = by_animal.entry(id.clone()).or_default();
        if let Some(last) = samples.last() {
            if t == last.t {
                return Err(Error::Validation(format!("duplicate sample for animal {id} at t={t} (line {line})")));
            }
            if t < last.t {
                return Err(Error::Validation(format!(
                    "animal {id}: timestamps not increasing ({} then {t}, line {line})",
                    last.t
                )));
            }
        }
        samples.push(Sample { t, x, y, imputed: false });
    }
    Ok(by_animal
        .into_iter()
        .map(|(animal_id, samples)| Trajectory {
            animal_id,
            samples,
            gaps: Vec::new(),
        })
        .collect())
}

pub fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectories(&text)
}

/// Serialize trajectories time-major (all animals at `t`, then `t+1`, ...).
pub fn format_trajectories(trajs: &[Trajectory]) -> String {
    let mut rows: Vec<(i64, usize, &Sample)> = trajs
        .iter()
        .enumerate()
        .flat_map(|(a, tr)| tr.samples.iter().map(move |s| (s.t, a, s)))
        .collect();
    rows.sort_by_key(|&(t, a, _)| (t, a));
    let mut out = String::with_capacity(rows.len() * 32 + 32);
    out.push_str("animal_id,timestamp,x,y\n");
    for (_, a, s) in rows {
        out.push_str(&format!("{},{},{},{}\n", trajs[a].animal_id, s.t, s.x, s.y));
    }
    out
}

pub fn write_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    write_atomic(path, format_trajectories(trajs).as_bytes())
}

/// Fill every missing 1 s tick inside gaps of at most `max_gap` seconds by
/// linear interpolation between the flanking real samples. Longer gaps are
/// kept and recorded in `gaps`.
pub fn fill_gaps(traj: &Trajectory, max_gap: i64) -> Trajectory {
    let mut samples = Vec::with_capacity(traj.samples.len());
    let mut gaps = Vec::new();
    for (k, s) in traj.samples.iter().enumerate() {
        if let Some(next) = traj.samples.get(k + 1) {
            samples.push(*s);
            let span = next.t - s.t;
            if span <= 1 {
                continue;
            }
            if span > max_gap {
                gaps.push((s.t, next.t));
                continue;
            }
            for t in s.t + 1..next.t {
                let a = (t - s.t) as f64 / span as f64;
                samples.push(Sample {
                    t,
                    x: s.x + a * (next.x - s.x),
                    y: s.y + a * (next.y - s.y),
                    imputed: true,
                });
            }
        } else {
            samples.push(*s);
        }
    }
    Trajectory {
        animal_id: traj.animal_id.clone(),
        samples,
        gaps,
    }
}
