use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sann_core::geometry::dist;
use sann_core::index::{read_forest, write_forest};
use sann_core::{parallel, BuildParams, Forest};
use sann_harness::criteria;
use sann_harness::dvec;
use sann_harness::experiments::{run_collision_suite, run_recall, run_vdc_suite, RecallOptions};
use sann_harness::ingest::{build_index, query, Ingest, JlDim};
use sann_harness::instance::{gen_random_instance, RandomInstance};
use sann_harness::report::{fmt, ExperimentReport};

#[derive(Parser)]
#[command(name = "sann", version, about = "Data-dependent hashing for approximate near neighbor search")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random instance: points.dvec, queries.dvec, planted.csv.
    Gen {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        d: usize,
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a forest from a dvec file.
    Build {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer the queries of a dvec file with a saved forest.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// Build, query and score against brute-force ground truth.
    Recall {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        /// Comma-separated tree counts; the forest is built once with the
        /// largest.
        #[arg(long, value_delimiter = ',', default_value = "12")]
        trees: Vec<usize>,
        /// Report prefix: writes `<report>.json` and `<report>.csv`.
        #[arg(long)]
        report: PathBuf,
    },
    /// Collision-probability tables for the spherical and grid partitions.
    Collisions {
        #[arg(long, default_value_t = 100)]
        d: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// Check the van der Corput guarantee on random covered sets.
    Vdc {
        #[arg(long, default_value_t = 100)]
        sets: usize,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.4")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// Run the invariant suites (criteria 5, 6, 7, 8, 10, 11).
    Selftest {
        /// Also run the statistical and end-to-end criteria 1–4 and 9.
        #[arg(long)]
        full: bool,
        /// Run only these criteria (comma-separated ids).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// A JSON file mirroring `BuildParams`, then flag overrides.
#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Annulus width, in the same units as `r`.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    leaf_cutoff: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Random projection target dimension; 0 disables it. Defaults to
    /// ⌈max(32, log₂n·log₂(log₂n + 2))⌉.
    #[arg(long)]
    jl_dim: Option<usize>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<(BuildParams, JlDim)> {
        let mut p = match &self.params {
            Some(path) => {
                let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))?
            }
            None => BuildParams::default(),
        };
        p.c = self.c.unwrap_or(p.c);
        p.r = self.r.unwrap_or(p.r);
        p.eps = self.eps.unwrap_or(p.eps);
        p.delta = self.delta.unwrap_or(p.delta);
        p.tau = self.tau.unwrap_or(p.tau);
        p.leaf_cutoff = self.leaf_cutoff.unwrap_or(p.leaf_cutoff);
        p.seed = self.seed.unwrap_or(p.seed);
        p.validate()?;
        let jl = match self.jl_dim {
            None => JlDim::Auto,
            Some(0) => JlDim::Off,
            Some(k) => JlDim::Fixed(k),
        };
        Ok((p, jl))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn finish(rep: &ExperimentReport) -> bool {
    for c in &rep.checks {
        println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    rep.passed()
}

fn run(cli: Cli) -> Result<bool> {
    let workers = parallel::declared_workers();
    match cli.cmd {
        Cmd::Gen { n, d, c, r, queries, seed, out } => {
            let inst = gen_random_instance(n, d, c, r, queries, seed)?;
            fs::create_dir_all(&out)?;
            let pts: Vec<&[f64]> = inst.points.iter().map(|p| p.coords.as_slice()).collect();
            dvec::save(&out.join("points.dvec"), &pts)?;
            let qs: Vec<&[f64]> = inst.queries.iter().map(|(q, _)| q.as_slice()).collect();
            dvec::save(&out.join("queries.dvec"), &qs)?;
            let mut w = csv::Writer::from_path(out.join("planted.csv"))?;
            w.write_record(["query", "planted"])?;
            for (k, (_, p)) in inst.queries.iter().enumerate() {
                w.write_record([k.to_string(), p.to_string()])?;
            }
            w.flush()?;
            println!("wrote {n} points and {queries} queries to {}", out.display());
            Ok(true)
        }
        Cmd::Build { data, params, trees, out } => {
            let (p, jl) = params.resolve()?;
            let data = dvec::load(&data)?;
            let trees = trees.unwrap_or_else(|| p.suggested_num_trees(data.len()));
            let forest = build_index(&data, &p, trees, jl, workers)?;
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            write_forest(&forest, &mut w)?;
            w.flush()?;
            println!("built {trees} trees over {} points (indexed dimension {})", forest.len(), forest.dim());
            Ok(true)
        }
        Cmd::Query { index, queries, out_csv } => {
            let f = File::open(&index).with_context(|| format!("opening {}", index.display()))?;
            let forest: Forest = read_forest(&mut BufReader::new(f))?;
            let ingest = Ingest::from_meta(&forest.meta)?;
            let qs = dvec::load(&queries)?;
            let mut w = csv::Writer::from_path(&out_csv)?;
            w.write_record(["query", "hit", "distance", "candidates", "nodes", "trees"])?;
            let mut answered = 0;
            for (k, q) in qs.iter().enumerate() {
                let out = query(&forest, &ingest, q, forest.trees.len(), forest.original.is_some())?;
                let d = match (out.hit, &forest.original) {
                    (Some(id), Some(orig)) => fmt(dist(&orig[id as usize].coords, q)),
                    _ => String::new(),
                };
                answered += usize::from(out.hit.is_some());
                w.write_record([
                    k.to_string(),
                    out.hit.map_or(String::new(), |id| id.to_string()),
                    d,
                    out.stats.candidates_examined.to_string(),
                    out.stats.nodes_visited.to_string(),
                    out.stats.trees_queried.to_string(),
                ])?;
            }
            w.flush()?;
            println!("answered {answered} of {} queries", qs.len());
            Ok(true)
        }
        Cmd::Recall { data, queries, params, trees, report } => {
            let (p, jl) = params.resolve()?;
            let points = dvec::load(&data)?
                .into_iter()
                .enumerate()
                .map(|(k, coords)| sann_core::Point { id: k as u32, coords })
                .collect();
            let queries = dvec::load(&queries)?.into_iter().map(|q| (q, 0)).collect();
            let inst = RandomInstance { points, queries, c: p.c, r: p.r, seed: p.seed };
            let rep = run_recall(&inst, &p, &RecallOptions { tree_counts: trees, jl, workers })?;
            rep.write_json(&report.with_extension("json"))?;
            rep.write_csv(&report.with_extension("csv"))?;
            for (k, v) in rep.metrics.iter().filter(|(k, _)| k.starts_with("recall")) {
                println!("{k} = {v:.4}");
            }
            Ok(finish(&rep))
        }
        Cmd::Collisions { d, trials, seed, out_csv } => {
            let rep = run_collision_suite(d, trials, seed, workers)?;
            rep.write_csv(&out_csv)?;
            rep.write_json(&out_csv.with_extension("json"))?;
            Ok(finish(&rep))
        }
        Cmd::Vdc { sets, size, eps, seed, out_csv } => {
            let rep = run_vdc_suite(sets, size, &eps, seed)?;
            rep.write_csv(&out_csv)?;
            rep.write_json(&out_csv.with_extension("json"))?;
            Ok(finish(&rep))
        }
        Cmd::Selftest { full, only, seed } => {
            let ids: Vec<u8> = if !only.is_empty() {
                only
            } else if full {
                (1..=11).collect()
            } else {
                criteria::SELFTEST.to_vec()
            };
            let results = criteria::run(&ids, seed, workers)?;
            for c in &results {
                println!("{c}");
            }
            Ok(results.iter().all(|c| c.pass))
        }
    }
}
