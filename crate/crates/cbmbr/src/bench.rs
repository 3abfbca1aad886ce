//! Benchmark harness and quality sweep.
//!
//! Timing methodology: monotonic clock, a fixed number of warmup runs that
//! are discarded, then the median over repeated runs, reported per phase.
//! Absolute per-run milliseconds are hardware-specific; the portable
//! quantity is the ratio between variants measured on the same machine, so
//! reports carry raw nanoseconds and leave ratios to the consumer. Runs are
//! single-threaded unless a thread count is configured, and every record
//! states the thread count it was measured with.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::clustering::{InitMethod, KMeansConfig};
use crate::decoders::{decode, vanilla_mbr, DecoderConfig};
use crate::error::{Error, Result};
use crate::rng::RngHandle;
use crate::synth::{gen_diverse, gen_multisystem, ScenarioSpec};
use crate::types::{phases, CandidateInstance, DecodeResult, Variant};
use crate::utility::UtilityFn;

/// Exact header line of `report.csv`; pinned by a golden-file test.
pub const BENCH_CSV_HEADER: &str = "variant,k,n,dims,utility,threads,generation_ns,kmeans_ns,utility_ns,end_to_end_ns,selected_index,selected_utility,agrees_with_vanilla";

/// Exact header line of `sweep.csv`.
pub const SWEEP_CSV_HEADER: &str = "k,seed,variant,init,regret,agrees_with_vanilla";

/// Where benchmark candidates come from.
#[derive(Debug, Clone)]
pub enum BenchInput {
    Scenario(ScenarioSpec),
    Diverse { n: usize, dims: usize },
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub input: BenchInput,
    pub variants: Vec<Variant>,
    pub k_sweep: Vec<usize>,
    pub utility: UtilityFn,
    pub niter: usize,
    pub init: InitMethod,
    /// Timed runs per (variant, k); the reported value is their median.
    pub repeats: usize,
    /// Untimed runs discarded before measuring.
    pub warmup: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::EmptySet("bench variants"));
        }
        if self.k_sweep.is_empty() {
            return Err(Error::EmptySet("bench k sweep"));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.variants.contains(&Variant::Oracle) {
            return Err(Error::InvalidConfig(
                "oracle is not a benchmark variant".into(),
            ));
        }
        Ok(())
    }
}

/// One benchmarked (variant, k) cell. Timing fields are medians over the
/// repeats except `generation_ns`, which is measured once because the
/// instance is generated once and shared by every cell.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRecord {
    pub variant: Variant,
    pub k: usize,
    pub n: usize,
    pub dims: usize,
    pub utility: String,
    pub threads: usize,
    pub generation_ns: u64,
    pub kmeans_ns: u64,
    pub utility_ns: u64,
    pub end_to_end_ns: u64,
    pub selected_index: usize,
    pub selected_utility: f64,
    pub agrees_with_vanilla: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchMeta {
    pub n: usize,
    pub dims: usize,
    pub utility: String,
    pub niter: usize,
    pub init: InitMethod,
    pub repeats: usize,
    pub warmup: usize,
    pub seed: u64,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub meta: BenchMeta,
    pub records: Vec<BenchRecord>,
}

fn median(samples: &mut [u64]) -> u64 {
    samples.sort_unstable();
    samples[(samples.len() - 1) / 2]
}

fn phase_ns(result: &DecodeResult, phase: &str) -> u64 {
    result.phase_timings.get(phase).copied().unwrap_or(0)
}

/// Clustering-equivalent phase: k-means for the centroid variants, the
/// plain mean computation for the aggregate path, zero for vanilla.
fn clustering_ns(result: &DecodeResult) -> u64 {
    phase_ns(result, phases::KMEANS).max(phase_ns(result, phases::AGGREGATE))
}

pub fn generate_input(input: &BenchInput, seed: u64) -> Result<CandidateInstance> {
    match input {
        BenchInput::Scenario(spec) => {
            let mut spec = spec.clone();
            spec.seed = spec.seed.wrapping_add(seed);
            Ok(gen_multisystem(&spec)?.instance)
        }
        BenchInput::Diverse { n, dims } => gen_diverse(*n, *dims, seed),
    }
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let gen_started = Instant::now();
    let instance = generate_input(&cfg.input, cfg.seed)?;
    let generation_ns = gen_started.elapsed().as_nanos() as u64;

    let baseline = vanilla_mbr(&instance, &cfg.utility)?;
    let rng = RngHandle::new(cfg.seed);
    let threads = crate::thread_count();

    let mut records = Vec::new();
    for &k in &cfg.k_sweep {
        for &variant in &cfg.variants {
            let decoder_cfg = DecoderConfig::new(
                variant,
                KMeansConfig::new(k).with_niter(cfg.niter).with_init(cfg.init),
                cfg.utility.clone(),
            );
            let run_once = || -> Result<(DecodeResult, u64)> {
                let started = Instant::now();
                let result = decode(&instance, &decoder_cfg, &rng)?;
                Ok((result, started.elapsed().as_nanos() as u64))
            };

            for _ in 0..cfg.warmup {
                run_once()?;
            }
            let mut kmeans_samples = Vec::with_capacity(cfg.repeats);
            let mut utility_samples = Vec::with_capacity(cfg.repeats);
            let mut total_samples = Vec::with_capacity(cfg.repeats);
            let mut last = None;
            for _ in 0..cfg.repeats {
                let (result, total) = run_once()?;
                kmeans_samples.push(clustering_ns(&result));
                utility_samples.push(phase_ns(&result, phases::UTILITY));
                total_samples.push(total);
                last = Some(result);
            }
            let result = last.expect("repeats >= 1");

            records.push(BenchRecord {
                variant,
                k,
                n: instance.hypotheses().rows(),
                dims: instance.hypotheses().dims(),
                utility: cfg.utility.name().to_string(),
                threads,
                generation_ns,
                kmeans_ns: median(&mut kmeans_samples),
                utility_ns: median(&mut utility_samples),
                end_to_end_ns: generation_ns + median(&mut total_samples),
                selected_index: result.selected_index,
                selected_utility: result.expected_utilities[result.selected_index],
                agrees_with_vanilla: result.selected_index == baseline.selected_index,
            });
        }
    }

    Ok(BenchReport {
        meta: BenchMeta {
            n: instance.hypotheses().rows(),
            dims: instance.hypotheses().dims(),
            utility: cfg.utility.name().to_string(),
            niter: cfg.niter,
            init: cfg.init,
            repeats: cfg.repeats,
            warmup: cfg.warmup,
            seed: cfg.seed,
            threads,
        },
        records,
    })
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub scenario: ScenarioSpec,
    pub ks: Vec<usize>,
    /// Trial seeds; each shifts the scenario seed and seeds the clustering.
    pub seeds: Vec<u64>,
    pub utility: UtilityFn,
    pub niter: usize,
    pub inits: Vec<InitMethod>,
}

/// One sweep trial. Regret is measured under the vanilla objective:
/// vanilla's expected utility of its own pick minus vanilla's expected
/// utility of the approximate decoder's pick; zero means the approximation
/// lost nothing.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub k: usize,
    pub seed: u64,
    pub variant: Variant,
    pub init: InitMethod,
    pub regret: f64,
    pub agrees_with_vanilla: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub variant: Variant,
    pub init: InitMethod,
    pub k: usize,
    pub mean_regret: f64,
    pub agreement_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub summary: Vec<SweepSummary>,
}

pub fn run_quality_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.ks.is_empty() {
        return Err(Error::EmptySet("sweep k list"));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::EmptySet("sweep seed list"));
    }
    if cfg.inits.is_empty() {
        return Err(Error::EmptySet("sweep init list"));
    }

    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        let mut spec = cfg.scenario.clone();
        spec.seed = spec.seed.wrapping_add(seed);
        let instance = gen_multisystem(&spec)?.instance;
        let baseline = vanilla_mbr(&instance, &cfg.utility)?;
        let best = baseline.expected_utilities[baseline.selected_index];
        let rng = RngHandle::new(seed);

        for &k in &cfg.ks {
            for &init in &cfg.inits {
                for variant in [Variant::Cbmbr, Variant::CbmbrCnt] {
                    let decoder_cfg = DecoderConfig::new(
                        variant,
                        KMeansConfig::new(k).with_niter(cfg.niter).with_init(init),
                        cfg.utility.clone(),
                    );
                    let result = decode(&instance, &decoder_cfg, &rng)?;
                    let regret = best - baseline.expected_utilities[result.selected_index];
                    records.push(SweepRecord {
                        k,
                        seed,
                        variant,
                        init,
                        regret,
                        agrees_with_vanilla: result.selected_index == baseline.selected_index,
                    });
                }
            }
        }
    }

    let mut summary = Vec::new();
    for variant in [Variant::Cbmbr, Variant::CbmbrCnt] {
        for &init in &cfg.inits {
            for &k in &cfg.ks {
                let cell: Vec<&SweepRecord> = records
                    .iter()
                    .filter(|r| r.variant == variant && r.init == init && r.k == k)
                    .collect();
                let n = cell.len() as f64;
                summary.push(SweepSummary {
                    variant,
                    init,
                    k,
                    mean_regret: cell.iter().map(|r| r.regret).sum::<f64>() / n,
                    agreement_rate: cell.iter().filter(|r| r.agrees_with_vanilla).count() as f64
                        / n,
                });
            }
        }
    }

    Ok(SweepReport { records, summary })
}

pub fn write_report_json<P: AsRef<Path>>(path: P, report: &BenchReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn write_report_csv<P: AsRef<Path>>(path: P, report: &BenchReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for record in &report.records {
        w.serialize(record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_json<P: AsRef<Path>>(path: P, report: &SweepReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn write_sweep_csv<P: AsRef<Path>>(path: P, report: &SweepReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for record in &report.records {
        w.serialize(record)?;
    }
    w.flush()?;
    Ok(())
}
