//! Result files for the plotting stage.
//!
//! Layout under the output directory:
//! `metadata.json`, `runs.csv`, `aggregate.csv`, and per sweep point
//! `points/NNN/{delays,energy,cycles,routers}.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use crate::metrics::estimate_cycle_probabilities;
use crate::scenario::{PointDescriptor, Scenario, SweepPoint};
use crate::sim::BatchResults;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

pub const DELAY_COLUMNS: [&str; 6] = [
    "batch",
    "sensor_id",
    "status_changed_at",
    "delay_s",
    "cycles_waited",
    "censored",
];
pub const ENERGY_COLUMNS: [&str; 9] = [
    "batch", "node_id", "role", "joules", "tx_s", "rx_s", "cs_s", "off_s", "switches",
];
pub const CYCLE_COLUMNS: [&str; 4] = ["batch", "cycle", "delivered", "p"];
pub const ROUTER_COLUMNS: [&str; 6] = ["batch", "node_id", "received", "forwarded", "dropped", "queued"];
pub const DESCRIPTOR_COLUMNS: [&str; 7] = [
    "mac_mode",
    "traffic_mode",
    "sensors",
    "mean_cycle",
    "omega",
    "slot",
    "tpo_dbm",
];

/// Results of one sweep point.
pub struct PointResult {
    pub point: SweepPoint,
    pub descriptor: PointDescriptor,
    pub results: BatchResults,
}

struct Sink {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Sink {
    fn create(path: PathBuf, header: &[&str]) -> Result<Self, OutputError> {
        let mut writer = csv::Writer::from_path(&path).map_err(|source| OutputError::Csv {
            path: path.clone(),
            source,
        })?;
        writer.write_record(header).map_err(|source| OutputError::Csv {
            path: path.clone(),
            source,
        })?;
        Ok(Self { path, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), OutputError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|source| OutputError::Csv {
                path: self.path.clone(),
                source,
            })
    }

    fn finish(mut self) -> Result<PathBuf, OutputError> {
        self.writer.flush().map_err(|source| OutputError::Io {
            path: self.path.clone(),
            source,
        })?;
        Ok(self.path)
    }
}

fn descriptor_fields(d: &PointDescriptor) -> Vec<String> {
    vec![
        d.mac_mode.as_str().into(),
        d.traffic_mode.as_str().into(),
        d.sensors.to_string(),
        d.mean_cycle.to_string(),
        d.omega.to_string(),
        d.slot.to_string(),
        d.tpo_dbm.to_string(),
    ]
}

fn mkdir(path: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(path).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn point_dir(index: usize) -> String {
    format!("points/{index:03}")
}

/// Writes every result file and returns the paths written.
pub fn write_results(
    dir: &Path,
    scenario: &Scenario,
    seed: u64,
    batches: u32,
    points: &[PointResult],
) -> Result<Vec<PathBuf>, OutputError> {
    mkdir(dir)?;
    let mut written = Vec::new();
    let scalar_names: Vec<&str> = points
        .first()
        .and_then(|p| p.results.runs.first())
        .map(|r| r.scalars().into_iter().map(|(n, _)| n).collect())
        .unwrap_or_default();

    let mut header = vec!["point"];
    header.extend(DESCRIPTOR_COLUMNS);
    header.push("batch");
    header.extend(&scalar_names);
    let mut runs = Sink::create(dir.join("runs.csv"), &header)?;

    let mut agg_header: Vec<String> = vec!["point".into()];
    agg_header.extend(DESCRIPTOR_COLUMNS.iter().map(|s| s.to_string()));
    agg_header.push("batches".into());
    for n in &scalar_names {
        for suffix in ["mean", "std", "stderr"] {
            agg_header.push(format!("{n}_{suffix}"));
        }
    }
    let agg_refs: Vec<&str> = agg_header.iter().map(String::as_str).collect();
    let mut agg = Sink::create(dir.join("aggregate.csv"), &agg_refs)?;

    for p in points {
        let desc = descriptor_fields(&p.descriptor);
        for run in &p.results.runs {
            let mut row = vec![p.point.index.to_string()];
            row.extend(desc.iter().cloned());
            row.push(run.batch.to_string());
            row.extend(run.scalars().into_iter().map(|(_, v)| v.to_string()));
            runs.row(row)?;
        }
        let mut row = vec![p.point.index.to_string()];
        row.extend(desc.iter().cloned());
        row.push(p.results.runs.len().to_string());
        for n in &scalar_names {
            let s = p.results.summary(n);
            for v in [s.map(|s| s.mean), s.map(|s| s.std), s.map(|s| s.stderr)] {
                row.push(v.unwrap_or(f64::NAN).to_string());
            }
        }
        agg.row(row)?;
        written.extend(write_point(dir, p)?);
    }
    written.push(runs.finish()?);
    written.push(agg.finish()?);

    let meta = json!({
        "tool": "parksim",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": scenario.name,
        "scenario_sha256": scenario.hash(),
        "seed": seed,
        "batches": batches,
        "sim_time": scenario.sim_time,
        "columns": {
            "delays": DELAY_COLUMNS,
            "energy": ENERGY_COLUMNS,
            "cycles": CYCLE_COLUMNS,
            "routers": ROUTER_COLUMNS,
            "runs": header,
            "aggregate": agg_header,
        },
        "points": points.iter().map(|p| json!({
            "index": p.point.index,
            "label": p.point.label(),
            "dir": point_dir(p.point.index),
            "params": p.descriptor,
        })).collect::<Vec<_>>(),
    });
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
    fs::write(&path, text).map_err(|source| OutputError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(written)
}

fn write_point(dir: &Path, p: &PointResult) -> Result<Vec<PathBuf>, OutputError> {
    let pdir = dir.join(point_dir(p.point.index));
    mkdir(&pdir)?;
    let mut delays = Sink::create(pdir.join("delays.csv"), &DELAY_COLUMNS)?;
    let mut energy = Sink::create(pdir.join("energy.csv"), &ENERGY_COLUMNS)?;
    let mut cycles = Sink::create(pdir.join("cycles.csv"), &CYCLE_COLUMNS)?;
    let mut routers = Sink::create(pdir.join("routers.csv"), &ROUTER_COLUMNS)?;
    for run in &p.results.runs {
        let b = run.batch.to_string();
        for d in &run.delays {
            delays.row([
                b.clone(),
                d.sensor.to_string(),
                d.status_changed_at.to_string(),
                d.delay.map(|v| v.to_string()).unwrap_or_default(),
                d.cycles_waited.map(|v| v.to_string()).unwrap_or_default(),
                d.censored.to_string(),
            ])?;
        }
        for e in &run.energy {
            energy.row([
                b.clone(),
                e.node.to_string(),
                e.role.as_str().to_string(),
                e.joules.to_string(),
                e.tx_s.to_string(),
                e.rx_s.to_string(),
                e.cs_s.to_string(),
                e.off_s.to_string(),
                e.switches.to_string(),
            ])?;
        }
        let probs = estimate_cycle_probabilities(&run.histogram).unwrap_or_default();
        for (i, &count) in run.histogram.counts.iter().enumerate() {
            let p = probs.get(i).copied().unwrap_or(f64::NAN);
            cycles.row([b.clone(), (i + 1).to_string(), count.to_string(), p.to_string()])?;
        }
        for (node, s) in &run.routers {
            routers.row([
                b.clone(),
                node.to_string(),
                s.received.to_string(),
                s.forwarded.to_string(),
                s.dropped.to_string(),
                s.queued.to_string(),
            ])?;
        }
    }
    Ok(vec![
        delays.finish()?,
        energy.finish()?,
        cycles.finish()?,
        routers.finish()?,
    ])
}
