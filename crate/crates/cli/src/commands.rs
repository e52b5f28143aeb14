use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kdebias::evaluation::{
    indirect_bias_classification, parse_simlex, professions_correlation, simlex_eval, weat_test, ClassificationConfig,
    EmbeddingSimilarity, Geometry, SimilarityBackend, WeatConfig,
};
use kdebias::linear_debias::equalize_set;
use kdebias::{
    fit_kernel_model, fit_linear_subspace, fit_preimage_map, neutralize_table, preimage_neutralize_table, rng, toy,
    write_embedding_text, BiasModel, DefiningSets, EmbeddingTable, EqualitySets, KernelSpec, PreimageOptions, SetsFile,
};
use rand::seq::index;
use serde::Serialize;
use serde_json::json;

use crate::io::{
    csv_sibling, load_embeddings, read_json, read_text, read_word_list, to_json, write_text, CliError, CliResult,
};
use crate::{ApplyArgs, EvalArgs, EvalCommand, EvalCommon, FitArgs, KernelArgs, SimArgs, ToyArgs};

/// Parse `--kernel` (inline JSON or a family name) and apply hyperparameter flags.
pub fn kernel_spec(args: &KernelArgs) -> CliResult<Option<KernelSpec>> {
    let Some(text) = args.kernel.as_deref() else {
        if args.gamma.is_some() || args.coef0.is_some() || args.degree.is_some() {
            return Err(CliError::Config("--gamma/--coef0/--degree need --kernel".into()));
        }
        return Ok(None);
    };
    let mut spec = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("--kernel: {e}")))?
    } else {
        KernelSpec::from_name(text)?
    };
    let unused = |flag: &str| CliError::Config(format!("{flag} does not apply to the {} kernel", spec_family(text)));
    match &mut spec {
        KernelSpec::Rbf { gamma } | KernelSpec::Laplace { gamma } => {
            if args.coef0.is_some() {
                return Err(unused("--coef0"));
            }
            if args.degree.is_some() {
                return Err(unused("--degree"));
            }
            *gamma = args.gamma.or(*gamma);
        }
        KernelSpec::Sigmoid { gamma, coef0 } => {
            if args.degree.is_some() {
                return Err(unused("--degree"));
            }
            *gamma = args.gamma.or(*gamma);
            *coef0 = args.coef0.unwrap_or(*coef0);
        }
        KernelSpec::Polynomial { gamma, coef0, degree } => {
            *gamma = args.gamma.or(*gamma);
            *coef0 = args.coef0.unwrap_or(*coef0);
            *degree = args.degree.unwrap_or(*degree);
        }
        _ => {
            if args.gamma.is_some() || args.coef0.is_some() || args.degree.is_some() {
                return Err(unused("--gamma/--coef0/--degree"));
            }
        }
    }
    Ok(Some(spec))
}

fn spec_family(text: &str) -> String {
    if text.trim_start().starts_with('{') {
        "given".into()
    } else {
        text.to_string()
    }
}

fn load_sets(path: &Path) -> CliResult<SetsFile> {
    read_json(path)
}

/// Defining-set words first, then `extra` seeded vocabulary words.
fn preimage_sample(table: &EmbeddingTable, sets: &DefiningSets, extra: usize, seed: u64) -> Vec<usize> {
    let mut seen = BTreeSet::new();
    let mut sample = Vec::new();
    for i in sets.word_indices() {
        if seen.insert(i) {
            sample.push(i);
        }
    }
    let rest: Vec<usize> = (0..table.len()).filter(|i| !seen.contains(i)).collect();
    let mut rng = rng::stream(seed, "preimage-sample");
    let drawn = index::sample(&mut rng, rest.len(), extra.min(rest.len()));
    sample.extend(drawn.iter().map(|j| rest[j]));
    sample
}

pub fn fit(args: &FitArgs, seed: u64) -> CliResult<()> {
    let table = load_embeddings(&args.embeddings, !args.no_normalize)?;
    let sets_file = load_sets(&args.sets)?;
    let sets = DefiningSets::from_words(&sets_file.defining_sets, &table)?;
    let spec = kernel_spec(&args.kernel)?;

    let (model, summary) = match spec {
        None => {
            let model = fit_linear_subspace(&table, &sets, args.components)?;
            let summary = json!({
                "kind": "linear",
                "components": model.k(),
                "dim": model.dim(),
                "defining_sets": sets.len(),
                "eigenvalues": model.explained.to_vec(),
            });
            (BiasModel::Linear { model }, summary)
        }
        Some(spec) => {
            let model = fit_kernel_model(&spec, &sets, &table, args.components)?;
            if model.discarded_negative > 0 {
                log::warn!(
                    "{} negative eigenvalues of the centered Gram matrix discarded",
                    model.discarded_negative
                );
            }
            let preimage = if args.no_preimage {
                None
            } else {
                let sample = preimage_sample(&table, &sets, args.preimage_sample, seed);
                let options = PreimageOptions {
                    lambda: args.ridge_lambda,
                    ..Default::default()
                };
                Some(fit_preimage_map(&model, &table, &sample, options)?)
            };
            let summary = json!({
                "kind": "kernel",
                "kernel": model.spec,
                "components": model.k(),
                "dim": model.dim(),
                "defining_sets": sets.len(),
                "eigenvalues": model.eigenvalues.to_vec(),
                "discarded_negative": model.discarded_negative,
                "preimage_sample": preimage.as_ref().map(|p| p.training_words.len()),
            });
            (BiasModel::Kernel { model, preimage }, summary)
        }
    };
    write_text(&args.out, &model.to_json()?)?;
    print!("{}", to_json(&summary)?);
    Ok(())
}

fn load_model(path: &Path, table: &EmbeddingTable) -> CliResult<BiasModel> {
    let model = BiasModel::from_json(&read_text(path)?).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    if model.dim() != table.dim() {
        return Err(kdebias::Error::DimensionMismatch {
            expected: model.dim(),
            got: table.dim(),
        }
        .into());
    }
    Ok(model)
}

pub fn apply(args: &ApplyArgs) -> CliResult<()> {
    let table = load_embeddings(&args.embeddings, !args.no_normalize)?;
    let model = load_model(&args.model, &table)?;
    let out = match &model {
        BiasModel::Linear { model } => {
            let neutral = neutralize_table(model, &table)?;
            if !args.equalize {
                neutral
            } else {
                let sets_path = args
                    .sets
                    .as_ref()
                    .ok_or_else(|| CliError::Config("--equalize needs --sets".into()))?;
                let sets = EqualitySets::from_words(&load_sets(sets_path)?.equality_sets, &table)?;
                let mut m = neutral.matrix().clone();
                for set in sets.sets() {
                    for (&i, v) in set.iter().zip(equalize_set(model, &table, set)?) {
                        m.row_mut(i).assign(&v);
                    }
                }
                log::info!("equalized {} sets", sets.sets().len());
                neutral.with_matrix(m)?
            }
        }
        BiasModel::Kernel { model, preimage } => {
            if args.equalize {
                return Err(CliError::Config(
                    "--equalize applies to linear models only; kernel models equalize through the metric".into(),
                ));
            }
            let map = preimage.as_ref().ok_or_else(|| {
                CliError::Config("kernel model has no pre-image map; refit without --no-preimage".into())
            })?;
            preimage_neutralize_table(map, model, &table)?
        }
    };
    write_text(&args.out, &write_embedding_text(&out, args.precision)?)
}

fn geometry(model: &BiasModel) -> Geometry<'_> {
    match model {
        BiasModel::Linear { model } => Geometry::LinearNeutralized(model),
        BiasModel::Kernel { model, .. } => Geometry::Corrected(model.metric()),
    }
}

#[derive(Serialize)]
struct SimRow {
    first: String,
    second: String,
    raw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    corrected: Option<f64>,
}

pub fn sim(args: &SimArgs) -> CliResult<()> {
    if !args.words.len().is_multiple_of(2) {
        return Err(CliError::Config("sim takes words in pairs: A1 B1 [A2 B2 ...]".into()));
    }
    let table = load_embeddings(&args.embeddings, !args.no_normalize)?;
    let model = args.model.as_ref().map(|p| load_model(p, &table)).transpose()?;
    let raw = EmbeddingSimilarity::new(&table, Geometry::Euclidean)?;
    let corrected = model
        .as_ref()
        .map(|m| EmbeddingSimilarity::new(&table, geometry(m)))
        .transpose()?;
    let mut rows = Vec::new();
    for pair in args.words.chunks(2) {
        rows.push(SimRow {
            first: pair[0].clone(),
            second: pair[1].clone(),
            raw: raw.similarity(&pair[0], &pair[1])?,
            corrected: corrected
                .as_ref()
                .map(|s| s.similarity(&pair[0], &pair[1]))
                .transpose()?,
        });
    }
    print!("{}", to_json(&rows)?);
    Ok(())
}

/// One CSV row per backend: `test,backend,metric,value,p,n_used`.
struct Report {
    test: &'static str,
    json: Vec<serde_json::Value>,
    csv: String,
}

impl Report {
    fn new(test: &'static str) -> Self {
        Report {
            test,
            json: Vec::new(),
            csv: "test,backend,metric,value,p,n_used\n".into(),
        }
    }

    fn push<T: Serialize>(
        &mut self,
        backend: &str,
        metric: &str,
        value: f64,
        p: Option<f64>,
        n_used: usize,
        detail: &T,
    ) -> CliResult<()> {
        let p_text = p.map(|p| p.to_string()).unwrap_or_default();
        writeln!(self.csv, "{},{backend},{metric},{value},{p_text},{n_used}", self.test).expect("write to String");
        let mut entry = serde_json::to_value(detail).map_err(kdebias::Error::from)?;
        if let serde_json::Value::Object(map) = &mut entry {
            map.insert("backend".into(), backend.into());
        }
        self.json.push(entry);
        Ok(())
    }

    fn finish(self, out: Option<&PathBuf>) -> CliResult<()> {
        let doc = to_json(&json!({ "test": self.test, "results": self.json }))?;
        match out {
            Some(path) if path != Path::new("-") => {
                write_text(path, &doc)?;
                write_text(&csv_sibling(path), &self.csv)
            }
            _ => {
                print!("{doc}");
                Ok(())
            }
        }
    }
}

pub fn eval(args: &EvalArgs, seed: Option<u64>) -> CliResult<()> {
    let common: &EvalCommon = match &args.command {
        EvalCommand::Weat { common, .. }
        | EvalCommand::Professions { common, .. }
        | EvalCommand::Classify { common, .. }
        | EvalCommand::Simlex { common, .. } => common,
    };
    let table = load_embeddings(&common.embeddings, !common.no_normalize)?;
    let model = common.model.as_ref().map(|p| load_model(p, &table)).transpose()?;
    let mut backends = vec![EmbeddingSimilarity::new(&table, Geometry::Euclidean)?];
    if let Some(m) = &model {
        backends.push(EmbeddingSimilarity::new(&table, geometry(m))?);
    }

    let report = match &args.command {
        EvalCommand::Weat {
            config, permutations, ..
        } => {
            let mut cfg: WeatConfig = read_json(config)?;
            if let Some(n) = permutations {
                cfg.permutations = *n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let mut report = Report::new("weat");
            for sim in &backends {
                let r = weat_test(sim, &cfg)?;
                let n = r.n_used.x + r.n_used.y;
                report.push(&sim.name(), "d", r.effect_size, Some(r.p_value), n, &r)?;
            }
            report
        }
        EvalCommand::Professions {
            professions,
            male,
            female,
            neighbors,
            lexicon_pool,
            ..
        } => {
            let professions = read_word_list(professions)?;
            let male = read_word_list(male)?;
            let female = read_word_list(female)?;
            let pool: Vec<String> = if *lexicon_pool {
                professions.iter().chain(&male).chain(&female).cloned().collect()
            } else {
                table.words().to_vec()
            };
            let mut report = Report::new("professions");
            for sim in &backends {
                let r = professions_correlation(sim, &table, &professions, &male, &pool, *neighbors, ("he", "she"))?;
                report.push(&sim.name(), "pearson_r", r.correlation, None, r.professions_used, &r)?;
            }
            report
        }
        EvalCommand::Classify {
            most_biased,
            train,
            test,
            ..
        } => {
            let cfg = ClassificationConfig {
                most_biased: *most_biased,
                train: *train,
                test: *test,
                seed: seed.unwrap_or(crate::DEFAULT_SEED),
                ..Default::default()
            };
            let mut report = Report::new("classify");
            for sim in &backends {
                let r = indirect_bias_classification(&table, &table, &sim.geometry(), &cfg)?;
                report.push(
                    &sim.name(),
                    "test_accuracy",
                    r.test_accuracy,
                    None,
                    r.n_train + r.n_test,
                    &r,
                )?;
            }
            report
        }
        EvalCommand::Simlex { pairs, .. } => {
            let text = read_text(pairs)?;
            let pairs = parse_simlex(text.as_bytes()).map_err(|source| CliError::Input {
                path: pairs.clone(),
                source,
            })?;
            let mut report = Report::new("simlex");
            for sim in &backends {
                let r = simlex_eval(sim, &pairs)?;
                report.push(&sim.name(), "spearman_rho", r.rho, None, r.used, &r)?;
            }
            report
        }
    };
    report.finish(common.out.as_ref())
}

pub fn demo_toy(args: &ToyArgs, seed: u64) -> CliResult<()> {
    let demo = toy::demo_toy(seed, args.points)?;
    let (before, after) = demo.bias_variance()?;
    log::info!("variance along the bias component: {before:.6} -> {after:.6}");
    write_text(&args.out, &demo.to_csv())
}
