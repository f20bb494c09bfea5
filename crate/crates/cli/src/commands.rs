use std::collections::BTreeMap;
use std::time::Instant;

use nngp_info::orthant::ORACLE_MAX_N;
use nngp_info::pac_bayes::stirling_ln_factorial;
use nngp_info::{
    build_dataset, kernel_matrix, orthant_oracle, realisable_bound, symmetry_info_bound,
    synthetic_dataset, ArchSpec, CovarianceMatrix, Dataset, DatasetVariant, InfoEstimate,
    KernelAnalysis, LabelVector, RawImageSet,
};
use serde_json::Value;

use crate::config::{Command, Fixture, RunConfig, Units};
use crate::error::{CliError, CliResult};
use crate::output::{emit, Table};

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    match cfg.command {
        Command::Info => info(cfg),
        Command::Bound => bound(cfg),
        Command::Sweep => sweep(cfg),
        Command::Oracle => oracle(cfg),
        Command::Symmetry => symmetry(cfg),
        Command::Kernel => kernel(cfg),
    }
}

fn num(x: f64) -> Value {
    Value::from(x)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, Value::from)
}

fn elapsed_ms(start: Instant) -> Value {
    num((start.elapsed().as_secs_f64() * 1e6).round() / 1e3)
}

/// Loads the IDX files on first use.
struct Source<'a> {
    cfg: &'a RunConfig,
    raw: Option<RawImageSet>,
}

impl<'a> Source<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Self { cfg, raw: None }
    }

    fn dataset(&mut self, variant: DatasetVariant, n: usize, seed: u64) -> CliResult<Dataset> {
        if variant == DatasetVariant::Synthetic {
            let s = self
                .cfg
                .synthetic
                .expect("synthetic settings resolved with the variant");
            return Ok(synthetic_dataset(n, s.d0, s.intra_class_cos, seed)?);
        }
        if self.raw.is_none() {
            self.raw = Some(RawImageSet::from_files(
                &self.cfg.mnist_images,
                &self.cfg.mnist_labels,
            )?);
        }
        Ok(build_dataset(self.raw.as_ref().unwrap(), variant, n, seed)?)
    }
}

fn kernel_for(cfg: &RunConfig, ds: &Dataset) -> CliResult<CovarianceMatrix> {
    let arch = ArchSpec::for_kernel(cfg.depth, ds.inputs.d0())?;
    let sigma = kernel_matrix(&ds.inputs, &arch)?;
    Ok(if cfg.jitter > 0.0 {
        sigma.with_jitter(cfg.jitter)
    } else {
        sigma
    })
}

fn estimate(cfg: &RunConfig, ds: &Dataset, seed: u64) -> CliResult<InfoEstimate> {
    let sigma = kernel_for(cfg, ds)?;
    Ok(KernelAnalysis::new(&sigma)?.estimate_c0(&ds.labels, cfg.samples, seed)?)
}

fn info_columns(units: Units) -> Vec<String> {
    let u = units.suffix();
    vec![
        "variant".into(),
        "n".into(),
        "seed".into(),
        "depth".into(),
        "samples".into(),
        format!("c0_{u}"),
        "c0_stderr".into(),
        format!("c1_{u}"),
        format!("info_upper_{u}"),
        "raw_bound_c0".into(),
        "error_bound_c0".into(),
        "raw_bound_c1".into(),
        "error_bound_c1".into(),
        "vacuous".into(),
        "wall_ms".into(),
    ]
}

/// One measured cell: the estimate and both PAC-Bayes certificates.
struct Cell {
    variant: DatasetVariant,
    n: usize,
    seed: u64,
    est: InfoEstimate,
    wall_ms: Value,
}

impl Cell {
    fn measure(
        cfg: &RunConfig,
        source: &mut Source,
        variant: DatasetVariant,
        n: usize,
        seed: u64,
    ) -> CliResult<Self> {
        let start = Instant::now();
        let ds = source.dataset(variant, n, seed)?;
        let est = estimate(cfg, &ds, seed)?;
        Ok(Self {
            variant,
            n,
            seed,
            est,
            wall_ms: elapsed_ms(start),
        })
    }

    fn row(&self, cfg: &RunConfig) -> CliResult<Vec<Value>> {
        let u = cfg.units;
        let b0 = realisable_bound(self.est.c0_nats, self.n, cfg.delta)?;
        let b1 = realisable_bound(self.est.info_upper_nats, self.n, cfg.delta)?;
        Ok(vec![
            Value::from(self.variant.as_str()),
            Value::from(self.n),
            Value::from(self.seed),
            Value::from(cfg.depth),
            Value::from(cfg.samples),
            num(u.convert(self.est.c0_nats)),
            num(u.convert(self.est.c0_std_error)),
            num(u.convert(self.est.c1_nats)),
            num(u.convert(self.est.info_upper_nats)),
            num(b0.raw_bound),
            num(b0.error_bound),
            num(b1.raw_bound),
            num(b1.error_bound),
            Value::from(b0.vacuous),
            self.wall_ms.clone(),
        ])
    }
}

fn info(cfg: &RunConfig) -> CliResult<()> {
    let cell = Cell::measure(
        cfg,
        &mut Source::new(cfg),
        cfg.variant(),
        cfg.n(),
        cfg.seed(),
    )?;
    let mut columns = info_columns(cfg.units);
    columns.push(format!("c0_per_sample_{}", cfg.units.suffix()));
    let mut table = Table::new(columns);
    let mut row = cell.row(cfg)?;
    row.push(num(cfg.units.convert(cell.est.c0_nats / cell.n as f64)));
    table.push(row);
    emit(cfg, &table, None)
}

fn bound(cfg: &RunConfig) -> CliResult<()> {
    let mut columns = info_columns(cfg.units);
    columns.push("bounds_consistent".into());
    let mut table = Table::new(columns);
    let n = cfg.n();

    if let Some(info) = cfg.info_nats {
        let b = realisable_bound(info, n, cfg.delta)?;
        table.push(vec![
            Value::Null,
            Value::from(n),
            Value::from(cfg.seed()),
            Value::from(cfg.depth),
            Value::from(cfg.samples),
            num(cfg.units.convert(info)),
            num(0.0),
            Value::Null,
            Value::Null,
            num(b.raw_bound),
            num(b.error_bound),
            Value::Null,
            Value::Null,
            Value::from(b.vacuous),
            num(0.0),
            Value::Null,
        ]);
        return emit(cfg, &table, None);
    }

    let cell = Cell::measure(cfg, &mut Source::new(cfg), cfg.variant(), n, cfg.seed())?;
    let b0 = realisable_bound(cell.est.c0_nats, n, cfg.delta)?;
    let b1 = realisable_bound(cell.est.info_upper_nats, n, cfg.delta)?;
    let propagated = cell.est.c0_std_error / (n as f64 - 1.0);
    let mut row = cell.row(cfg)?;
    row.push(Value::from(b0.raw_bound <= b1.raw_bound + 3.0 * propagated));
    table.push(row);
    emit(cfg, &table, None)
}

fn sweep(cfg: &RunConfig) -> CliResult<()> {
    let mut source = Source::new(cfg);
    let mut cells = Vec::new();
    for &variant in &cfg.variants {
        for &n in &cfg.n_list {
            for &seed in &cfg.seeds {
                cells.push(Cell::measure(cfg, &mut source, variant, n, seed)?);
            }
        }
    }
    cells.sort_by_key(|c| (c.variant, c.n, c.seed));

    let mut table = Table::new(info_columns(cfg.units));
    for c in &cells {
        table.push(c.row(cfg)?);
    }

    let u = cfg.units.suffix();
    let stats = |name: String| {
        [
            format!("{name}_mean"),
            format!("{name}_min"),
            format!("{name}_max"),
        ]
    };
    let mut columns = vec!["variant".to_string(), "n".into(), "seeds".into()];
    columns.extend(stats(format!("c0_{u}")));
    columns.extend(stats(format!("c1_{u}")));
    columns.extend(stats("error_bound_c0".into()));
    columns.extend(stats("error_bound_c1".into()));
    columns.push("wall_ms_mean".into());
    let mut summary = Table::new(columns);

    let mut groups: BTreeMap<(DatasetVariant, usize), Vec<usize>> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        groups.entry((c.variant, c.n)).or_default().push(i);
    }
    let col = |name: &str| table.columns.iter().position(|c| c == name).unwrap();
    for ((variant, n), idx) in groups {
        let mut row = vec![
            Value::from(variant.as_str()),
            Value::from(n),
            Value::from(idx.len()),
        ];
        for name in [
            format!("c0_{u}"),
            format!("c1_{u}"),
            "error_bound_c0".into(),
            "error_bound_c1".into(),
        ] {
            let j = col(&name);
            let vals: Vec<f64> = idx
                .iter()
                .map(|&i| table.rows[i][j].as_f64().unwrap_or(f64::NAN))
                .collect();
            row.push(num(vals.iter().sum::<f64>() / vals.len() as f64));
            row.push(num(vals.iter().copied().fold(f64::INFINITY, f64::min)));
            row.push(num(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
        }
        let j = col("wall_ms");
        let wall: f64 = idx
            .iter()
            .map(|&i| table.rows[i][j].as_f64().unwrap_or(0.0))
            .sum();
        row.push(num(wall / idx.len() as f64));
        summary.push(row);
    }
    emit(cfg, &table, Some(&summary))
}

fn oracle(cfg: &RunConfig) -> CliResult<()> {
    let o = cfg
        .oracle
        .expect("oracle settings resolved for the oracle command");
    let n = if o.fixture == Fixture::Bivariate {
        2
    } else {
        cfg.n()
    };
    if n > ORACLE_MAX_N {
        return Err(CliError::new(
            "N_TOO_LARGE",
            format!("rejection oracle supports n <= {ORACLE_MAX_N}, got {n}"),
        ));
    }
    let start = Instant::now();
    let (variant, sigma, labels) = match o.fixture {
        Fixture::Dataset => {
            let ds = Source::new(cfg).dataset(cfg.variant(), n, cfg.seed())?;
            let sigma = kernel_for(cfg, &ds)?;
            (Value::from(cfg.variant().as_str()), sigma, ds.labels)
        }
        Fixture::Bivariate => {
            if o.rho.is_nan() || o.rho.abs() >= 1.0 {
                return Err(CliError::invalid(format!(
                    "--rho must lie in (-1, 1), got {}",
                    o.rho
                )));
            }
            (
                Value::Null,
                CovarianceMatrix::bivariate(o.rho),
                LabelVector::ones(2),
            )
        }
        Fixture::Identity => (
            Value::Null,
            CovarianceMatrix::identity(n),
            LabelVector::ones(n),
        ),
    };
    let est = KernelAnalysis::new(&sigma)?.estimate_c0(&labels, cfg.samples, cfg.seed())?;
    let orc = orthant_oracle(&sigma, &labels, o.trials, cfg.seed())?;
    let p_est = est.orthant_probability();
    let se_est = est.orthant_std_error();
    let combined = se_est.hypot(orc.std_error);
    let agree = (p_est - orc.probability).abs() <= 3.0 * combined;

    let u = cfg.units;
    let mut table = Table::new([
        "fixture".to_string(),
        "variant".into(),
        "n".into(),
        "seed".into(),
        "samples".into(),
        "trials".into(),
        "estimator_p".into(),
        "estimator_stderr".into(),
        "oracle_p".into(),
        "oracle_stderr".into(),
        "combined_stderr".into(),
        "agree".into(),
        format!("c0_{}", u.suffix()),
        format!("oracle_info_{}", u.suffix()),
        "wall_ms".into(),
    ]);
    let oracle_info = (orc.hits > 0).then(|| u.convert(-orc.probability.ln()));
    table.push(vec![
        serde_json::to_value(o.fixture)?,
        variant,
        Value::from(n),
        Value::from(cfg.seed()),
        Value::from(cfg.samples),
        Value::from(o.trials),
        num(p_est),
        num(se_est),
        num(orc.probability),
        num(orc.std_error),
        num(combined),
        Value::from(agree),
        num(u.convert(est.c0_nats)),
        opt(oracle_info),
        elapsed_ms(start),
    ]);
    emit(cfg, &table, None)
}

fn symmetry(cfg: &RunConfig) -> CliResult<()> {
    let s = cfg
        .symmetry
        .as_ref()
        .expect("symmetry settings resolved for the symmetry command");
    let start = Instant::now();
    let arch = ArchSpec::new(s.widths.len() + 1, s.d0, s.widths.clone(), s.weight_bits)?;
    let bound = symmetry_info_bound(&arch)?;
    let dims = arch.layer_dims();
    let weights: f64 = dims.windows(2).map(|p| p[0] as f64 * p[1] as f64).sum();
    let stirling = std::f64::consts::LN_2 * f64::from(s.weight_bits) * weights
        - s.widths
            .iter()
            .map(|&d| stirling_ln_factorial(d))
            .sum::<f64>();

    let (variant, c0, c0_se) = if s.with_c0 {
        let ds = Source::new(cfg).dataset(cfg.variant(), cfg.n(), cfg.seed())?;
        let est = estimate(cfg, &ds, cfg.seed())?;
        (
            Value::from(cfg.variant().as_str()),
            Some(est.c0_nats),
            Some(est.c0_std_error),
        )
    } else {
        (Value::Null, None, None)
    };

    let u = cfg.units;
    let dims_str = dims
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("-");
    let mut table = Table::new([
        "dims".to_string(),
        "weight_bits".into(),
        "weights".into(),
        format!("symmetry_{}", u.suffix()),
        format!("symmetry_stirling_{}", u.suffix()),
        "variant".into(),
        "n".into(),
        "seed".into(),
        format!("c0_{}", u.suffix()),
        "c0_stderr".into(),
        "wall_ms".into(),
    ]);
    table.push(vec![
        Value::from(dims_str),
        Value::from(s.weight_bits),
        num(weights),
        num(u.convert(bound)),
        num(u.convert(stirling)),
        variant,
        if s.with_c0 {
            Value::from(cfg.n())
        } else {
            Value::Null
        },
        if s.with_c0 {
            Value::from(cfg.seed())
        } else {
            Value::Null
        },
        opt(c0.map(|x| u.convert(x))),
        opt(c0_se.map(|x| u.convert(x))),
        elapsed_ms(start),
    ]);
    emit(cfg, &table, None)
}

fn kernel(cfg: &RunConfig) -> CliResult<()> {
    let start = Instant::now();
    let ds = Source::new(cfg).dataset(cfg.variant(), cfg.n(), cfg.seed())?;
    let sigma = kernel_for(cfg, &ds)?;
    let n = sigma.n();
    let off: Vec<f64> = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|p| sigma[p])
        .collect();
    let (min, max, mean) = if off.is_empty() {
        (None, None, None)
    } else {
        (
            Some(off.iter().copied().fold(f64::INFINITY, f64::min)),
            Some(off.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Some(off.iter().sum::<f64>() / off.len() as f64),
        )
    };
    let analysis = KernelAnalysis::new(&sigma)?;

    let mut table = Table::new([
        "variant",
        "n",
        "seed",
        "depth",
        "jitter",
        "offdiag_min",
        "offdiag_mean",
        "offdiag_max",
        "log_det",
        "det_root",
        "inverse_residual",
        "wall_ms",
    ]);
    table.push(vec![
        Value::from(cfg.variant().as_str()),
        Value::from(n),
        Value::from(cfg.seed()),
        Value::from(cfg.depth),
        num(cfg.jitter),
        opt(min),
        opt(mean),
        opt(max),
        num(analysis.factor().log_det()),
        num(analysis.det_root()),
        num(analysis.residual()),
        elapsed_ms(start),
    ]);
    emit(cfg, &table, None)
}
