//! Subcommand implementations. Data goes to files, diagnostics to stderr.

use std::fs;
use std::path::{Path, PathBuf};

use depool_core::color::{rgb_to_ycbcr, ycbcr_to_rgb};
use depool_core::corpus::synthetic_corpus;
use depool_core::depool::{
    depool_forward,
    dump::{dump_subbands, load_subbands},
    pad_to_even, pyramid_reconstruct, BankKind, DetailStash, KernelBank, PyramidDecomposition,
};
use depool_core::fusion::{classical_fuse_pipeline, round_trip, FusionConfig};
use depool_core::metrics::{evaluate_pair, fmt4, format_csv, mean_report, psnr, MetricReport};
use depool_core::network::{fuse_network, gradcheck_depool, load_weights, save_weights, InferenceOptions, Model};
use depool_core::pnm::{load_gray, load_pnm, save_gray, save_rgb, Image};
use depool_core::{Error, Execution, FeatureMap, Field};
use rayon::prelude::*;

use crate::manifest::PairManifest;

pub const DECOMPOSITION_FILE: &str = "decomposition.txt";
pub const BENCH_HEADER: &str = "config,sd,vif,ag,scd,en,rt_psnr";
const GRADCHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{failed} of {total} rows failed")]
    Rows { failed: usize, total: usize, code: i32 },
    #[error("{0}")]
    Check(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(e) => e.exit_code(),
            Failure::Rows { code, .. } => *code,
            Failure::Check(_) => 1,
        }
    }
}

type Outcome = Result<(), Failure>;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn level_stem(level: usize) -> String {
    format!("level{level}")
}

pub fn decompose(input: &Path, levels: usize, bank: BankKind, out: &Path) -> Outcome {
    if levels == 0 {
        return Err(Error::Parameter("--levels must be at least 1".into()).into());
    }
    let x = load_gray(input)?;
    let (padded, shape) = pad_to_even(&x, levels);
    if padded.shape() != shape {
        eprintln!("note: {}x{} input padded to {}x{} by reflection", shape.0, shape.1, padded.height(), padded.width());
    }
    create_dir(out)?;
    let kernels = KernelBank::from_kind(bank);
    let mut current = padded;
    for level in 1..=levels {
        let s = depool_forward(&current, &kernels)?;
        dump_subbands(&s, out, &level_stem(level))?;
        current = s.ms;
    }
    let meta = format!("levels {levels}\nbank {bank}\nheight {}\nwidth {}\n", shape.0, shape.1);
    write_text(&out.join(DECOMPOSITION_FILE), &meta)?;
    eprintln!("{levels} levels written to {}, deepest subbands {}x{}", out.display(), current.height(), current.width());
    Ok(())
}

struct DecompositionMeta {
    levels: usize,
    bank: BankKind,
    shape: (usize, usize),
}

fn read_meta(dir: &Path) -> Result<DecompositionMeta, Error> {
    let path = dir.join(DECOMPOSITION_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let bad = |what: &str| Error::Parameter(format!("{}: missing or malformed {what}", path.display()));
    let value = |key: &str| {
        text.lines().filter_map(|l| l.split_once(' ')).find(|(k, _)| *k == key).map(|(_, v)| v.trim().to_string()).ok_or_else(|| bad(key))
    };
    let number = |key: &str| value(key)?.parse::<usize>().map_err(|_| bad(key));
    Ok(DecompositionMeta { levels: number("levels")?, bank: value("bank")?.parse()?, shape: (number("height")?, number("width")?) })
}

pub fn reconstruct(dir: &Path, bank: BankKind, out: &Path, reference: Option<&Path>) -> Outcome {
    let meta = read_meta(dir)?;
    if meta.bank != bank {
        return Err(Error::Parameter(format!("{} was decomposed with the {} bank, not {bank}", dir.display(), meta.bank)).into());
    }
    if meta.levels == 0 {
        return Err(Error::Parameter(format!("{}: zero levels", dir.display())).into());
    }
    let sets = (1..=meta.levels).map(|level| load_subbands(dir, &level_stem(level))).collect::<Result<Vec<_>, _>>()?;
    let stash = sets
        .iter()
        .map(|s| DetailStash {
            vd: FeatureMap::single(s.vd.clone()),
            hd: FeatureMap::single(s.hd.clone()),
            dd: FeatureMap::single(s.dd.clone()),
        })
        .collect();
    let deepest = FeatureMap::single(sets[meta.levels - 1].ms.clone());
    let pyramid = PyramidDecomposition::new(deepest, stash, meta.shape, false)?;
    let y = pyramid_reconstruct(&pyramid, &KernelBank::from_kind(bank))?.into_channels().remove(0);
    save_gray(&y, out)?;
    if let Some(reference) = reference {
        let r = load_gray(reference)?;
        let err = y.max_abs_diff(&r)?;
        eprintln!("max_abs_error {err:e}");
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<FusionConfig, Error> {
    match path {
        Some(p) => FusionConfig::parse(&fs::read_to_string(p).map_err(|e| io_err(p, e))?),
        None => Ok(FusionConfig::default()),
    }
}

pub fn fuse(ir: &Path, vi: &Path, config: Option<&Path>, out: &Path, color: bool) -> Outcome {
    let cfg = load_config(config)?;
    let ir = load_gray(ir)?;
    if color {
        let rgb = match load_pnm(vi)? {
            Image::Color(rgb) => rgb,
            Image::Gray(_) => {
                return Err(Error::Parameter(format!("--color needs a color (PPM) visible image, {} is grayscale", vi.display())).into())
            }
        };
        let (y, cb, cr) = rgb_to_ycbcr(&rgb);
        let fused = classical_fuse_pipeline(&ir, &y, &cfg)?;
        save_rgb(&ycbcr_to_rgb(&fused, &cb, &cr)?, out)?;
    } else {
        let fused = classical_fuse_pipeline(&ir, &load_gray(vi)?, &cfg)?;
        save_gray(&fused, out)?;
    }
    Ok(())
}

pub fn infer(ir: &Path, vi: &Path, weights: &Path, out: &Path, execution: Execution) -> Outcome {
    let model = load_weights(weights)?;
    let (ir, vi) = (load_gray(ir)?, load_gray(vi)?);
    let fused = fuse_network(&ir, &vi, &model, InferenceOptions { execution, ..Default::default() })?;
    save_gray(&fused, out)?;
    Ok(())
}

pub fn init_weights(seed: u64, out: &Path) -> Outcome {
    save_weights(&Model::random(seed), out)?;
    Ok(())
}

fn evaluate_row(id: &str, ir: &Path, vi: &Path, fused: Option<&PathBuf>) -> Result<MetricReport, Error> {
    let fused = fused.ok_or_else(|| Error::Parameter("row has no fused image".into()))?;
    evaluate_pair(id, &load_gray(fused)?, &load_gray(ir)?, &load_gray(vi)?)
}

pub fn metrics(manifest: &Path, out: &Path) -> Outcome {
    let m = PairManifest::load(manifest)?;
    let results: Vec<_> = m.rows.par_iter().map(|r| evaluate_row(&r.id, &r.ir, &r.vi, r.fused.as_ref())).collect();
    let mut reports = Vec::new();
    let mut first_code = None;
    for (row, result) in m.rows.iter().zip(results) {
        match result {
            Ok(r) => reports.push(r),
            Err(e) => {
                eprintln!("{}: {e}", row.id);
                first_code.get_or_insert(e.exit_code());
            }
        }
    }
    write_text(out, &format_csv(&reports))?;
    match first_code {
        None => Ok(()),
        Some(code) => Err(Failure::Rows { failed: m.rows.len() - reports.len(), total: m.rows.len(), code }),
    }
}

pub fn parse_size(text: &str) -> Result<(usize, usize), Error> {
    let bad = || Error::Parameter(format!("size must look like 8x8, got {text:?}"));
    let (h, w) = text.split_once('x').ok_or_else(bad)?;
    Ok((h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?))
}

pub fn gradcheck(size: &str, seed: u64) -> Outcome {
    let report = gradcheck_depool(parse_size(size)?, seed)?;
    let pass = report.max_relative_error <= GRADCHECK_TOLERANCE;
    eprintln!(
        "{} max relative error {:e} (tolerance {GRADCHECK_TOLERANCE:e})",
        if pass { "PASS" } else { "FAIL" },
        report.max_relative_error
    );
    if pass {
        Ok(())
    } else {
        Err(Failure::Check(format!("gradient check error {:e} exceeds {GRADCHECK_TOLERANCE:e}", report.max_relative_error)))
    }
}

fn config_files(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "cfg") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Parameter(format!("no .cfg files in {}", dir.display())));
    }
    Ok(files)
}

fn bench_row(name: &str, cfg: &FusionConfig, pairs: &[(String, Field, Field)]) -> Result<String, Error> {
    let rows = pairs
        .par_iter()
        .map(|(id, ir, vi)| -> Result<(MetricReport, f64), Error> {
            let fused = classical_fuse_pipeline(ir, vi, cfg)?;
            let report = evaluate_pair(id.as_str(), &fused, ir, vi)?;
            let fidelity = (psnr(&round_trip(ir, cfg)?, ir)? + psnr(&round_trip(vi, cfg)?, vi)?) / 2.0;
            Ok((report, fidelity))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (reports, fidelity): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let m = mean_report(&reports).expect("manifest has rows");
    let rt = fidelity.iter().sum::<f64>() / fidelity.len() as f64;
    let cols = [m.sd, m.vif, m.ag, m.scd, m.en, rt].map(fmt4);
    Ok(format!("{name},{}", cols.join(",")))
}

pub fn bench(manifest: &Path, configs: &Path, out: &Path) -> Outcome {
    let m = PairManifest::load(manifest)?;
    let files = config_files(configs)?;
    let pairs = m.rows.par_iter().map(|r| Ok((r.id.clone(), load_gray(&r.ir)?, load_gray(&r.vi)?))).collect::<Result<Vec<_>, Error>>()?;
    let mut csv = format!("{BENCH_HEADER}\n");
    for file in files {
        let name = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let cfg = load_config(Some(&file))?;
        let row = bench_row(&name, &cfg, &pairs)?;
        eprintln!("{row}");
        csv.push_str(&row);
        csv.push('\n');
    }
    write_text(out, &csv)?;
    Ok(())
}

pub fn corpus(out: &Path) -> Outcome {
    create_dir(out)?;
    let mut manifest = String::from("pair_id,ir,vi\n");
    for pair in synthetic_corpus() {
        let (ir, vi) = (format!("{}_ir.pgm", pair.id), format!("{}_vi.pgm", pair.id));
        save_gray(&pair.ir, out.join(&ir))?;
        save_gray(&pair.vi, out.join(&vi))?;
        manifest.push_str(&format!("{},{ir},{vi}\n", pair.id));
    }
    write_text(&out.join("manifest.csv"), &manifest)?;
    Ok(())
}
