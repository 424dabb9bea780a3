//! `scop` command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use scop::coding::{CodebookSet, Method};
use scop::learning::BaseDistance;
use scop::patterns::{write_sample_dump, PatternKind};
use scop::pipeline::{
    split_csv, stratified_split, summary_json, Cache, Dataset, DatasetSource, Experiment, ExperimentConfig, RunResult,
    CACHE_ENV,
};

#[derive(Parser, Debug)]
#[command(name = "scop", version, about = "Texture classification and retrieval with shape co-occurrence patterns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build trees and write the pattern samples of every image.
    Extract {
        #[command(flatten)]
        common: Common,
    },
    /// Learn codebooks on one split's training images (or on every image).
    FitCodebooks {
        #[command(flatten)]
        common: Common,
        /// Split whose training images are used.
        #[arg(long, default_value_t = 0, conflicts_with = "all")]
        split: usize,
        /// Fit on the whole dataset instead.
        #[arg(long)]
        all: bool,
    },
    /// Encode every image against a codebook file from `fit-codebooks`.
    Encode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        codebooks: PathBuf,
    },
    /// Run the classification splits.
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Build the geodesic index over the dataset and write recall curves.
    Retrieve {
        #[command(flatten)]
        common: Common,
    },
    /// Classification and retrieval, plus the resolved configuration.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Print the resolved configuration as TOML.
    ShowConfig {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long, short, default_value = "scop-out")]
    out: PathBuf,
    /// Artifact cache directory.
    #[arg(long, env = CACHE_ENV)]
    cache: Option<PathBuf>,
}

/// Flags overriding fields of the configuration, applied after `--preset`
/// and `--config`.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset: uiuc, umd, brodatz, scene, synthetic.
    #[arg(long)]
    preset: Option<String>,
    /// Dataset root with one sub-directory per class.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Built-in synthetic corpus with this many images per class.
    #[arg(long, conflicts_with = "data")]
    synthetic: Option<usize>,
    /// KM, SC or FC.
    #[arg(long)]
    method: Option<Method>,
    /// Comma-separated subset of SS,SA,SAG,SAS.
    #[arg(long, value_delimiter = ',')]
    patterns: Option<Vec<PatternKind>>,
    /// Codebook size: `N` for every pattern or `PATTERN=N`; repeatable.
    #[arg(long)]
    k: Vec<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    family: Option<usize>,
    #[arg(long)]
    a_min: Option<u64>,
    #[arg(long)]
    a_max_fraction: Option<f64>,
    #[arg(long)]
    tau_multiplier: Option<usize>,
    /// Fixed ancestor interval r.
    #[arg(long)]
    interval: Option<usize>,
    #[arg(long)]
    multi_scale: bool,
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_d_per_atom: Option<usize>,
    #[arg(long)]
    max_fit_samples: Option<usize>,
    #[arg(long)]
    pca_max_dim: Option<usize>,
    /// SVM cost.
    #[arg(long)]
    c: Option<f64>,
    /// RBF bandwidth.
    #[arg(long)]
    sigma: Option<f64>,
    /// RBF power transform.
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    cv_c: bool,
    #[arg(long)]
    cv_sigma: bool,
    #[arg(long)]
    cv_folds: Option<usize>,
    /// Neighbours of the retrieval graph.
    #[arg(long)]
    retrieval_k: Option<usize>,
    /// Retrieval base distance: `hik` or `euclidean`.
    #[arg(long)]
    base: Option<String>,
    /// Evaluate splits concurrently.
    #[arg(long)]
    fast: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(root) = &self.data {
            c.dataset = DatasetSource::Directory { root: root.clone() };
        }
        if let Some(per_class) = self.synthetic {
            c.dataset = match c.dataset {
                DatasetSource::Synthetic { size, seed, .. } => DatasetSource::Synthetic { per_class, size, seed },
                DatasetSource::Directory { .. } => match DatasetSource::default() {
                    DatasetSource::Synthetic { size, seed, .. } => DatasetSource::Synthetic { per_class, size, seed },
                    other => other,
                },
            };
        }
        macro_rules! set {
            ($($field:ident).+ = $value:expr) => {
                if let Some(v) = $value {
                    c.$($field).+ = v;
                }
            };
        }
        set!(method = self.method);
        set!(patterns = self.patterns.clone());
        set!(lambda = self.lambda);
        set!(family = self.family);
        set!(a_min = self.a_min);
        set!(a_max_fraction = self.a_max_fraction);
        set!(tau_multiplier = self.tau_multiplier);
        set!(scales = self.scales.clone());
        set!(train_per_class = self.train_per_class);
        set!(splits = self.splits);
        set!(seed = self.seed);
        set!(n_d_per_atom = self.n_d_per_atom);
        set!(max_fit_samples = self.max_fit_samples);
        set!(pca_max_dim = self.pca_max_dim);
        set!(kernel.c = self.c);
        set!(kernel.cv_folds = self.cv_folds);
        set!(retrieval.k = self.retrieval_k);
        if self.interval.is_some() {
            c.interval = self.interval;
        }
        if self.sigma.is_some() {
            c.kernel.sigma = self.sigma;
        }
        if self.power.is_some() {
            c.kernel.power = self.power;
        }
        c.multi_scale |= self.multi_scale;
        c.kernel.cv_c |= self.cv_c;
        c.kernel.cv_sigma |= self.cv_sigma;
        c.fast |= self.fast;
        for spec in &self.k {
            match spec.split_once('=') {
                Some((p, n)) => {
                    let p: PatternKind = p.parse().map_err(anyhow::Error::msg)?;
                    c.k.insert(p, n.parse().with_context(|| format!("bad codebook size in `{spec}`"))?);
                }
                None => {
                    let n: usize = spec.parse().with_context(|| format!("bad codebook size `{spec}`"))?;
                    c.k = PatternKind::ALL.iter().map(|&p| (p, n)).collect();
                }
            }
        }
        if let Some(base) = &self.base {
            c.retrieval.base = Some(match base.as_str() {
                "hik" | "one-minus-hik" => BaseDistance::OneMinusHik,
                "euclidean" => BaseDistance::Euclidean { power: c.kernel_power().unwrap_or(1.0) },
                other => bail!("unknown base distance `{other}` (hik, euclidean)"),
            });
        }
        c.validate()?;
        Ok(c)
    }
}

/// Codebooks plus what is needed to reuse them.
#[derive(Serialize, Deserialize)]
struct CodebookFile {
    config_hash: String,
    r: usize,
    /// Images the codebooks were fitted on.
    images: Vec<String>,
    codebooks: CodebookSet,
}

struct Session {
    config: ExperimentConfig,
    dataset: Dataset,
    cache: Cache,
    out: PathBuf,
}

impl Session {
    fn open(common: &Common) -> Result<Self> {
        let config = common.config.resolve()?;
        let dataset = Dataset::load(&config.dataset)?;
        log::info!("{} images in {} classes", dataset.len(), dataset.class_count());
        let cache = match &common.cache {
            Some(dir) => Cache::at(dir),
            None => Cache::disabled(),
        };
        std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
        Ok(Session { config, dataset, cache, out: common.out.clone() })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn report_cache(&self) {
        if self.cache.dir().is_some() {
            let s = self.cache.stats();
            log::info!("cache hits {:?}, misses {:?}, corrupt {}", s.hits, s.misses, s.corrupt);
        }
    }
}

fn file_stem(name: &str) -> String {
    name.replace(['/', '\\'], "__")
}

fn extract(s: &Session) -> Result<()> {
    let exp = Experiment::new(&s.config, &s.dataset, &s.cache)?;
    let all: Vec<usize> = (0..s.dataset.len()).collect();
    let r = exp.interval(&all);
    let samples = exp.samples(r)?;
    let dir = s.out.join("samples");
    std::fs::create_dir_all(&dir)?;
    let mut csv = String::from("image,label,shapes");
    for p in &s.config.patterns {
        write!(csv, ",{p}")?;
    }
    csv.push('\n');
    for (i, (_, buckets)) in samples.iter().enumerate() {
        let name = &s.dataset.names[i];
        std::fs::write(dir.join(format!("{}.txt", file_stem(name))), write_sample_dump(buckets))?;
        let shapes: usize = exp.levels(i).iter().map(|l| l.tree.len()).sum();
        write!(csv, "{name},{},{shapes}", s.dataset.class_names[s.dataset.labels[i]])?;
        for &p in &s.config.patterns {
            write!(csv, ",{}", buckets.count(p))?;
        }
        csv.push('\n');
    }
    s.write("extract.csv", &csv)?;
    println!("r = {r}; samples of {} images written to {}", samples.len(), dir.display());
    Ok(())
}

fn fit_codebooks(s: &Session, split: usize, all: bool) -> Result<()> {
    let exp = Experiment::new(&s.config, &s.dataset, &s.cache)?;
    let (images, seed) = if all {
        ((0..s.dataset.len()).collect(), s.config.seed)
    } else {
        s.dataset.check_train_size(s.config.train_per_class)?;
        let seed = scop::pipeline::split_seed(s.config.seed, split);
        (stratified_split(&s.dataset, s.config.train_per_class, seed).0, seed)
    };
    let learned = exp.learn_codebooks(&images, seed)?;
    let file = CodebookFile {
        config_hash: s.config.hash(),
        r: learned.r,
        images: images.iter().map(|&i| s.dataset.names[i].clone()).collect(),
        codebooks: learned.codebooks,
    };
    let path = s.write("codebooks.json", &serde_json::to_string(&file)?)?;
    let sizes: Vec<String> = file.codebooks.codebooks.iter().map(|c| format!("{}{}:{}", c.pattern, c.polarity.symbol(), c.k())).collect();
    println!("r = {}; {} codebooks [{}] written to {}", file.r, sizes.len(), sizes.join(" "), path.display());
    s.report_cache();
    Ok(())
}

fn encode(s: &Session, codebooks: &Path) -> Result<()> {
    let text = std::fs::read_to_string(codebooks).with_context(|| format!("reading {}", codebooks.display()))?;
    let file: CodebookFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", codebooks.display()))?;
    file.codebooks.validate().map_err(anyhow::Error::msg)?;
    if file.codebooks.method != s.config.method {
        log::warn!("codebooks were fitted for {}, configuration says {}", file.codebooks.method, s.config.method);
    }
    let exp = Experiment::new(&s.config, &s.dataset, &s.cache)?;
    let samples = exp.samples(file.r)?;
    let mut csv = String::new();
    for (i, (_, buckets)) in samples.iter().enumerate() {
        let d = file.codebooks.encode(buckets)?;
        write!(csv, "{},{}", s.dataset.names[i], s.dataset.class_names[s.dataset.labels[i]])?;
        for v in &d.values {
            write!(csv, ",{v}")?;
        }
        csv.push('\n');
    }
    let path = s.write("descriptors.csv", &csv)?;
    println!("{} descriptors written to {}", samples.len(), path.display());
    Ok(())
}

fn classify(s: &Session) -> Result<RunResult> {
    let exp = Experiment::new(&s.config, &s.dataset, &s.cache)?;
    let result = exp.classify()?;
    s.write("splits.csv", &split_csv(&result))?;
    s.write("summary.json", &summary_json(&result))?;
    println!(
        "{} accuracy {:.1} ± {:.1} over {} splits ({:.1}s)",
        result.method,
        100.0 * result.mean,
        100.0 * result.std,
        result.splits.len(),
        result.timing.splits_s
    );
    s.report_cache();
    Ok(result)
}

fn retrieve(s: &Session) -> Result<()> {
    if let Some(m) = s.dataset.members().iter().position(|m| m.len() < 2) {
        bail!("class `{}` has a single image; retrieval needs two per class", s.dataset.class_names[m]);
    }
    let exp = Experiment::new(&s.config, &s.dataset, &s.cache)?;
    let (result, index) = exp.retrieval()?;
    s.write("recall.csv", &result.csv())?;
    s.write("retrieval.json", &serde_json::to_string_pretty(&result)?)?;
    let (g, p) = result.recall_at(result.summary_nr);
    println!(
        "recall at N_r = {}: geodesic {:.3}, plain {:.3} (k = {}, {} graph components)",
        result.summary_nr,
        g,
        p,
        result.k,
        index.component.iter().collect::<std::collections::BTreeSet<_>>().len()
    );
    s.report_cache();
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Extract { common } => extract(&Session::open(common)?),
        Command::FitCodebooks { common, split, all } => fit_codebooks(&Session::open(common)?, *split, *all),
        Command::Encode { common, codebooks } => encode(&Session::open(common)?, codebooks),
        Command::Classify { common } => classify(&Session::open(common)?).map(drop),
        Command::Retrieve { common } => retrieve(&Session::open(common)?),
        Command::Experiment { common } => {
            let s = Session::open(common)?;
            s.write("config.toml", &s.config.to_toml())?;
            classify(&s)?;
            retrieve(&s)
        }
        Command::ShowConfig { common } => {
            print!("{}", common.config.resolve()?.to_toml());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> ExperimentConfig {
        let cli = Cli::try_parse_from(args).unwrap();
        match cli.command {
            Command::ShowConfig { common } => common.config.resolve().unwrap(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_preset() {
        let c = parse(&[
            "scop", "show-config", "--preset", "umd", "--method", "FC", "--k", "16", "--k", "SA=40", "--patterns", "SS,SA",
            "--splits", "3", "--sigma", "0.5", "--base", "euclidean", "--multi-scale",
        ]);
        assert_eq!(c.method, Method::Fisher);
        assert_eq!(c.patterns, vec![PatternKind::SS, PatternKind::SA]);
        assert_eq!(c.k[&PatternKind::SS], 16);
        assert_eq!(c.k[&PatternKind::SA], 40);
        assert_eq!(c.splits, 3);
        assert_eq!(c.kernel.sigma, Some(0.5));
        assert!(c.multi_scale);
        assert_eq!(c.retrieval.base, Some(BaseDistance::Euclidean { power: 1.0 }));
    }

    #[test]
    fn bad_values_are_rejected() {
        for args in [
            &["scop", "show-config", "--k", "XX=3"][..],
            &["scop", "show-config", "--a-max-fraction", "2"][..],
            &["scop", "show-config", "--base", "cosine"][..],
        ] {
            let cli = Cli::try_parse_from(args).unwrap();
            let Command::ShowConfig { common } = cli.command else { unreachable!() };
            assert!(common.config.resolve().is_err());
        }
        assert!(Cli::try_parse_from(["scop", "show-config", "--method", "XX"]).is_err());
    }

    #[test]
    fn file_stems_are_flat() {
        assert_eq!(file_stem("stripes/001"), "stripes__001");
    }
}
