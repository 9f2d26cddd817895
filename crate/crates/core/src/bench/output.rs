use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use super::sim::{plan_points, run_point, BerRecord, PointCounts, PointSpec};
use crate::{Error, Result};

/// Frozen CSV header.
pub const CSV_HEADER: &str =
    "scheme,detector,snr_db,speed_kmh,bit_errors,bits,frame_errors,frames,ber,fer,seed,elapsed_ms";

pub const LIBRARY_NAME: &str = env!("CARGO_PKG_NAME");
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Machine-readable record of a run, rewritten after every point so an
/// interrupted run can resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub plan: String,
    pub snr_convention: String,
    /// Fraction of grid cells carrying data, identical for every scheme.
    pub data_fraction: f64,
    pub mf_gs_delta: f64,
    pub mf_gs_max_iters: usize,
    pub points: Vec<ManifestPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPoint {
    pub scheme: String,
    pub detector: String,
    pub snr_db: f64,
    pub speed_kmh: f64,
    pub sub_seed: u64,
    pub done: bool,
    pub counts: Option<PointCounts>,
    pub low_confidence: bool,
    pub record: Option<BerRecord>,
}

/// `<out>.manifest.json` next to the CSV.
pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl Manifest {
    pub fn new(plan: &ExperimentPlan) -> Self {
        let points = plan_points(plan)
            .iter()
            .map(|p| ManifestPoint {
                scheme: p.scheme.name().to_string(),
                detector: p.detector.label().to_string(),
                snr_db: p.snr_db,
                speed_kmh: p.speed_kmh,
                sub_seed: plan.point_seed(p.speed_idx, p.snr_idx),
                done: false,
                counts: None,
                low_confidence: false,
                record: None,
            })
            .collect();
        Manifest {
            library: LIBRARY_NAME.to_string(),
            version: LIBRARY_VERSION.to_string(),
            config_hash: plan.config_hash(),
            seed: plan.seed,
            plan: plan.to_plan_text(),
            snr_convention: "data-referenced: noise variance = mean QAM symbol energy / 10^(snr_db/10)"
                .to_string(),
            data_fraction: plan.frame.spectral_efficiency(),
            mf_gs_delta: plan.effective_delta(),
            mf_gs_max_iters: plan.max_iters,
            points,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(path, text.as_bytes())
    }

    pub fn completed(&self) -> usize {
        self.points.iter().filter(|p| p.done).count()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// RFC 4180 CSV with the frozen header, one row per record.
pub fn records_to_csv(records: &[BerRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("in-memory CSV write");
    }
    let bytes = w.into_inner().expect("in-memory CSV flush");
    if records.is_empty() {
        format!("{CSV_HEADER}\n").into_bytes()
    } else {
        bytes
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<BerRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<BerRecord>, _>>()
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    /// Ignore an existing manifest and recompute every point.
    pub fresh: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 0,
            fresh: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<BerRecord>,
    pub resumed: usize,
    pub manifest: PathBuf,
}

/// Runs every point of `plan`, writing the CSV and its manifest after each
/// point. A manifest with the same config hash is picked up and its finished
/// points are kept.
pub fn run_plan(
    plan: &ExperimentPlan,
    out: &Path,
    options: RunOptions,
    mut on_point: impl FnMut(&BerRecord, bool),
) -> Result<RunSummary> {
    plan.validate()?;
    let mpath = manifest_path(out);
    let mut manifest = Manifest::new(plan);
    let mut resumed = 0;
    if !options.fresh && mpath.exists() {
        let old = Manifest::load(&mpath)?;
        if old.config_hash == manifest.config_hash && old.points.len() == manifest.points.len() {
            for (new, old) in manifest.points.iter_mut().zip(old.points) {
                if old.done && old.record.is_some() && old.sub_seed == new.sub_seed {
                    *new = old;
                    resumed += 1;
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;

    let points: Vec<PointSpec> = plan_points(plan);
    for (idx, point) in points.iter().enumerate() {
        if let Some(rec) = manifest.points[idx].record.as_ref().filter(|_| manifest.points[idx].done) {
            on_point(rec, true);
            continue;
        }
        let (record, counts) = pool.install(|| run_point(plan, point))?;
        let entry = &mut manifest.points[idx];
        entry.done = true;
        entry.low_confidence = record.low_confidence();
        entry.counts = Some(counts);
        entry.record = Some(record.clone());
        on_point(&record, false);
        flush(&manifest, out, &mpath)?;
    }
    flush(&manifest, out, &mpath)?;
    Ok(RunSummary {
        records: finished_records(&manifest),
        resumed,
        manifest: mpath,
    })
}

fn finished_records(manifest: &Manifest) -> Vec<BerRecord> {
    manifest
        .points
        .iter()
        .filter(|p| p.done)
        .filter_map(|p| p.record.clone())
        .collect()
}

fn flush(manifest: &Manifest, out: &Path, mpath: &Path) -> Result<()> {
    write_atomic(out, &records_to_csv(&finished_records(manifest)))?;
    manifest.save(mpath)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::EqualizerKind;
    use crate::modem::Scheme;

    fn one_point_plan() -> ExperimentPlan {
        let mut plan = ExperimentPlan::preset("smoke").unwrap();
        plan.schemes = vec![Scheme::Otsm];
        plan.detectors = vec![EqualizerKind::MfGs];
        plan.snr_db_grid = vec![15.0];
        plan.frames_per_point = 8;
        plan.timing = false;
        plan
    }

    #[test]
    fn header_matches_record_fields() {
        let bytes = records_to_csv(&[]);
        assert_eq!(String::from_utf8(bytes).unwrap(), format!("{CSV_HEADER}\n"));
        let plan = one_point_plan();
        let point = plan_points(&plan)[0];
        let rec = BerRecord::from_counts(&point, &PointCounts::default(), 1, 2);
        let text = String::from_utf8(records_to_csv(&[rec])).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().nth(1).unwrap(), "OTSM,mf-gs,15.0,120.0,0,0,0,0,0.0,0.0,1,2");
    }

    #[test]
    fn one_point_plan_writes_one_row_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("res.csv");
        let plan = one_point_plan();
        let summary = run_plan(&plan, &out, RunOptions::default(), |_, _| {}).unwrap();
        assert_eq!(summary.records.len(), 1);
        let rows = read_csv(&out).unwrap();
        assert_eq!(rows, summary.records);
        let m = Manifest::load(&summary.manifest).unwrap();
        assert_eq!(m.config_hash, plan.config_hash());
        assert_eq!(m.version, LIBRARY_VERSION);
        assert_eq!(m.points[0].sub_seed, plan.point_seed(0, 0));
        assert_eq!(m.points[0].sub_seed, rows[0].seed);
        assert!((m.data_fraction - 9.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn interrupted_run_resumes_from_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("res.csv");
        let mut plan = one_point_plan();
        plan.snr_db_grid = vec![10.0, 20.0];
        let full = run_plan(&plan, &out, RunOptions::default(), |_, _| {}).unwrap();
        let reference = fs::read(&out).unwrap();

        // Simulate an interruption after the first point.
        let mut m = Manifest::load(&full.manifest).unwrap();
        m.points[1].done = false;
        m.points[1].record = None;
        m.save(&full.manifest).unwrap();
        fs::write(&out, records_to_csv(&full.records[..1])).unwrap();

        let mut fresh_points = 0;
        let again = run_plan(&plan, &out, RunOptions::default(), |_, resumed| {
            fresh_points += usize::from(!resumed)
        })
        .unwrap();
        assert_eq!(again.resumed, 1);
        assert_eq!(fresh_points, 1);
        assert_eq!(fs::read(&out).unwrap(), reference);
    }

    #[test]
    fn changed_plan_does_not_reuse_points() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("res.csv");
        let plan = one_point_plan();
        run_plan(&plan, &out, RunOptions::default(), |_, _| {}).unwrap();
        let mut other = plan.clone();
        other.seed = 77;
        let s = run_plan(&other, &out, RunOptions::default(), |_, _| {}).unwrap();
        assert_eq!(s.resumed, 0);
        assert_eq!(s.records[0].seed, other.point_seed(0, 0));
    }

    #[test]
    fn unwritable_output_reports_path() {
        let plan = one_point_plan();
        let out = Path::new("/nonexistent-dir/x/res.csv");
        match run_plan(&plan, out, RunOptions::default(), |_, _| {}) {
            Err(Error::Io { path, .. }) => assert!(path.starts_with("/nonexistent-dir/x")),
            other => panic!("{other:?}"),
        }
    }
}
