use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use picpriv::baselines::{bovw_encode, gist_extract, kmeans_fit, load_descriptors, load_pgm, GaborBank, RulePolicy};
use picpriv::corpus::{default_split_sizes, load_corpus, make_split, save_corpus, tagged_images, ImageRecord, SplitPlan};
use picpriv::eval::{average_over_seeds, breakeven, paired_ttest, score_curves, write_curve, write_report_table, SeedAverage};
use picpriv::pipeline::{
    evaluate_over_seeds, fusion_vocab, score_model, train_model, CnnOptions, FusionOptions, ModelSpec, SplitSizes, SvmOptions,
    TagOptions, TestScores, Trained,
};
use picpriv::synth::{self, SynthConfig};
use picpriv::tag_stats::{cloud_tsv, cooc_graph, frequency_table, private_public_ratio, rank_by_ig, ranked_grid_tsv, ranked_tsv};
use picpriv::tag_vectorize::{bot_encode, fuse_features};
use serde::Serialize;

use crate::args::*;

/// Snapshot written as `config.json` into every output directory.
#[derive(Serialize)]
struct RunConfig<'a, T: Serialize> {
    version: &'static str,
    command: &'a Command,
    resolved: T,
}

struct Run<'a> {
    command: &'a Command,
    dir: PathBuf,
}

impl<'a> Run<'a> {
    fn start(command: &'a Command, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Run {
            command,
            dir: dir.to_path_buf(),
        })
    }

    fn config<T: Serialize>(&self, resolved: T) -> Result<()> {
        let cfg = RunConfig {
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            resolved,
        };
        self.write("config.json", serde_json::to_string_pretty(&cfg)? + "\n")
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }
}

fn corpus(path: &Path) -> Result<Vec<ImageRecord>> {
    let records = load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))?;
    ensure!(!records.is_empty(), "corpus {} is empty", path.display());
    Ok(records)
}

fn check_block(records: &[ImageRecord], block: &str) -> Result<()> {
    for r in records {
        r.block(block)?;
    }
    Ok(())
}

fn load_split(path: &Path) -> Result<SplitPlan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading split {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing split {}", path.display()))
}

fn training_side<'a>(records: &'a [ImageRecord], split: Option<&Path>) -> Result<Vec<&'a ImageRecord>> {
    match split {
        Some(p) => Ok(load_split(p)?.partition(records)?.0),
        None => Ok(records.iter().collect()),
    }
}

fn split_sizes(args: &SplitSizeArgs, n: usize) -> SplitSizes {
    let (train, test) = default_split_sizes(n);
    SplitSizes {
        train: args.train.unwrap_or(train),
        test: args.test.unwrap_or(test),
        ratio: args.ratio,
    }
}

fn svm_options(a: &SvmArgs) -> Result<SvmOptions> {
    let grid = a.grid.spec();
    grid.validate()?;
    Ok(SvmOptions {
        block: a.block.clone(),
        grid,
        standardize: a.standardize,
        parallel: a.parallel,
    })
}

fn tag_options(a: &TagArgs) -> TagOptions {
    TagOptions {
        pool: a.pool,
        k_deep: a.k_deep_tags,
    }
}

fn cnn_options(tags: &TagArgs, a: &CnnArgs) -> Result<CnnOptions> {
    let cnn = a.cnn();
    cnn.validate()?;
    let train = a.train();
    train.validate()?;
    ensure!(a.dev_folds >= 2, "--dev-folds must be at least 2");
    Ok(CnnOptions {
        tags: tag_options(tags),
        cnn,
        train,
        dev_folds: a.dev_folds,
        embeddings: a.embeddings.clone(),
    })
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth_cmd(a),
        Command::Split(a) => split_cmd(command, a),
        Command::TrainSvm(a) => train_svm(command, a),
        Command::TrainTagcnn(a) => train_tagcnn(command, a),
        Command::Eval(a) => eval(command, a),
        Command::Ttest(a) => ttest(command, a),
        Command::Curves(a) => curves(command, a),
        Command::Tagstats(a) => tagstats(command, a),
        Command::Fuse(a) => fuse(command, a),
        Command::Baseline(a) => baseline(command, &a.kind),
    }
}

fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_private: a.private,
        n_public: a.public,
        dim: a.dim,
        margin: a.margin,
        tag_noise: a.tag_noise,
        seed: a.seed,
    };
    let records = synth::generate(&cfg)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_corpus(&a.out, &records)?;
    println!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

fn split_cmd(command: &Command, a: &SplitArgs) -> Result<()> {
    let records = corpus(&a.corpus)?;
    let sizes = split_sizes(&a.sizes, records.len());
    let run = Run::start(command, &a.out)?;
    for seed in 0..a.seeds {
        let plan = make_split(&records, seed, sizes.train, sizes.test, sizes.ratio)?;
        run.write(&format!("split-{seed}.json"), serde_json::to_string_pretty(&plan)? + "\n")?;
    }
    run.config(&sizes)?;
    println!(
        "wrote {} splits of {}/{} to {}",
        a.seeds,
        sizes.train,
        sizes.test,
        a.out.display()
    );
    Ok(())
}

fn train_svm(command: &Command, a: &TrainSvmArgs) -> Result<()> {
    let opts = svm_options(&a.svm)?;
    let records = corpus(&a.corpus)?;
    check_block(&records, &opts.block)?;
    let train = training_side(&records, a.split.as_deref())?;
    let spec = ModelSpec::Svm(opts);
    let Trained::Svm { model, grid } = train_model(&spec, &train, a.seed)? else {
        unreachable!("svm spec yields an svm model")
    };
    let run = Run::start(command, &a.out)?;
    let mut text = Vec::new();
    model.write_text(&mut text)?;
    run.write("model.txt", text)?;
    run.write("cv_table.tsv", grid.table_tsv())?;
    run.config(&spec)?;
    println!(
        "best C={} kernel={} cv weighted F1={:.4}; model in {}",
        grid.best_c,
        grid.best_kernel,
        grid.best_f1,
        a.out.display()
    );
    Ok(())
}

fn train_tagcnn(command: &Command, a: &TrainTagCnnArgs) -> Result<()> {
    let spec = ModelSpec::Tagcnn(cnn_options(&a.tags, &a.cnn)?);
    let records = corpus(&a.corpus)?;
    let train = training_side(&records, a.split.as_deref())?;
    let Trained::TagCnn { model, history } = train_model(&spec, &train, a.seed)? else {
        unreachable!("tagcnn spec yields a tag cnn")
    };
    let run = Run::start(command, &a.out)?;
    model.save(run.dir.join("model.bin"))?;
    model.vocab.save(run.dir.join("vocab.txt"))?;
    let mut hist = String::from("epoch\ttrain_loss\tdev_weighted_f1\tdev_loss\n");
    for e in &history.epochs {
        writeln!(
            hist,
            "{}\t{:.6}\t{:.6}\t{:.6}",
            e.epoch, e.train_loss, e.dev_weighted_f1, e.dev_loss
        )?;
    }
    run.write("history.tsv", hist)?;
    run.config(&spec)?;
    println!(
        "best epoch {} of {}; model in {}",
        history.best_epoch,
        history.epochs.len(),
        a.out.display()
    );
    Ok(())
}

fn model_spec(a: &EvalArgs) -> Result<ModelSpec> {
    Ok(match a.model {
        ModelChoice::Svm => ModelSpec::Svm(svm_options(&a.svm)?),
        ModelChoice::Tagcnn => ModelSpec::Tagcnn(cnn_options(&a.tags, &a.cnn)?),
        ModelChoice::Fusion => ModelSpec::Fusion(FusionOptions {
            svm: svm_options(&a.svm)?,
            tags: tag_options(&a.tags),
            top_tags: a.top_tags,
        }),
        ModelChoice::Rule => ModelSpec::Rule {
            person_tags: RulePolicy::new(a.person_tags.iter().cloned())?,
            tags: tag_options(&a.tags),
        },
    })
}

fn write_average(run: &Run, name: &str, avg: &SeedAverage, seeds: &[String]) -> Result<()> {
    let mut rows = vec![(format!("{name}-mean"), avg.mean)];
    rows.extend(seeds.iter().zip(&avg.per_seed).map(|(s, r)| (format!("{name}-{s}"), *r)));
    let mut table = Vec::new();
    write_report_table(&mut table, &rows)?;
    run.write("report.tsv", table)?;
    run.write("per_seed.json", serde_json::to_string_pretty(avg)? + "\n")
}

fn eval(command: &Command, a: &EvalArgs) -> Result<()> {
    ensure!((0.0..=1.0).contains(&a.threshold), "--threshold must lie in [0, 1]");
    let run = Run::start(command, &a.out)?;
    if !a.scores.is_empty() {
        let mut reports = Vec::new();
        for path in &a.scores {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let s = TestScores::from_tsv(&text).with_context(|| format!("parsing {}", path.display()))?;
            reports.push(s.report(a.threshold)?);
        }
        let avg = average_over_seeds(&reports)?;
        let names: Vec<String> = (0..reports.len()).map(|i| format!("file{i}")).collect();
        write_average(&run, "scores", &avg, &names)?;
        run.config(serde_json::json!({ "threshold": a.threshold }))?;
        println!(
            "scores: accuracy {:.2}%, overall F1 {:.4}",
            100.0 * avg.mean.accuracy,
            avg.mean.overall.f1
        );
        return Ok(());
    }
    let records = corpus(a.corpus.as_deref().expect("clap requires a corpus without score files"))?;
    ensure!(a.seeds > 0, "--seeds must be positive");
    let spec = model_spec(a)?;
    match &spec {
        ModelSpec::Svm(o) => check_block(&records, &o.block)?,
        ModelSpec::Fusion(o) => check_block(&records, &o.svm.block)?,
        _ => {}
    }
    let sizes = split_sizes(&a.sizes, records.len());
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let runs = evaluate_over_seeds(&records, &spec, &sizes, &seeds, a.threshold)?;
    for (seed, s) in seeds.iter().zip(&runs.scores) {
        run.write(&format!("scores/seed-{seed}.tsv"), s.to_tsv())?;
    }
    let names: Vec<String> = seeds.iter().map(|s| format!("seed{s}")).collect();
    write_average(&run, spec.name(), &runs.average, &names)?;
    run.config(serde_json::json!({ "model": &spec, "sizes": &sizes, "seeds": &seeds, "threshold": a.threshold }))?;
    let m = &runs.average.mean;
    println!(
        "{} over {} seeds: accuracy {:.2}%, overall F1 {:.4}, private F1 {:.4}",
        spec.name(),
        seeds.len(),
        100.0 * m.accuracy,
        m.overall.f1,
        m.private.f1
    );
    Ok(())
}

fn per_seed_f1(dir: &Path) -> Result<Vec<f64>> {
    let path = dir.join("per_seed.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let avg: SeedAverage = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(avg.per_seed.iter().map(|r| r.overall.f1).collect())
}

fn ttest(command: &Command, a: &TtestArgs) -> Result<()> {
    let (fa, fb) = (per_seed_f1(&a.a)?, per_seed_f1(&a.b)?);
    let t = paired_ttest(&fa, &fb)?;
    let run = Run::start(command, &a.out)?;
    run.write("ttest.json", serde_json::to_string_pretty(&t)? + "\n")?;
    run.config(serde_json::json!({ "a_f1": fa, "b_f1": fb }))?;
    println!(
        "t = {:.4}, df = {}, significant at 0.05: {}{}",
        t.t_statistic,
        t.degrees_of_freedom,
        t.significant_at_05,
        if t.degenerate { " (zero spread)" } else { "" }
    );
    Ok(())
}

fn curves(command: &Command, a: &CurvesArgs) -> Result<()> {
    let text = fs::read_to_string(&a.scores).with_context(|| format!("reading {}", a.scores.display()))?;
    let s = TestScores::from_tsv(&text)?;
    let curve = score_curves(&s.scores, &s.labels)?;
    let (threshold, value) = breakeven(&curve)?;
    let run = Run::start(command, &a.out)?;
    let mut table = Vec::new();
    write_curve(&mut table, &curve)?;
    run.write("curve.tsv", table)?;
    run.write("breakeven.tsv", format!("threshold\tvalue\n{threshold:.6}\t{value:.6}\n"))?;
    run.config(serde_json::json!({ "points": curve.points.len() }))?;
    println!(
        "{} thresholds; precision = recall = {value:.4} at {threshold:.4}",
        curve.points.len()
    );
    Ok(())
}

fn tagstats(command: &Command, a: &TagstatsArgs) -> Result<()> {
    let (Some(corpus_path), Some(out)) = (&a.corpus, &a.out) else {
        bail!("tagstats needs --corpus and --out");
    };
    let records = corpus(corpus_path)?;
    let images = tagged_images(&records, a.pool, a.k_deep_tags);
    let run = Run::start(command, out)?;
    let name = a.stat.name();
    match &a.stat {
        Stat::Rank { top, grid_rows } => {
            let mut ranked = rank_by_ig(&images, None);
            ranked.truncate(*top);
            run.write("rank.tsv", ranked_tsv(&ranked))?;
            if let Some(rows) = grid_rows {
                ensure!(*rows > 0, "--grid-rows must be positive");
                run.write("rank_grid.tsv", ranked_grid_tsv(&ranked, *rows, ranked.len().div_ceil(*rows)))?;
            }
            println!("ranked {} tags", ranked.len());
        }
        Stat::Freq { class, top } => {
            let table = frequency_table(&images, (*class).into());
            let mut text = String::from("tag\tcount\n");
            for (tag, count) in table.top(*top) {
                writeln!(text, "{tag}\t{count}")?;
            }
            run.write("freq.tsv", text)?;
        }
        Stat::Cooc {
            class,
            anchor,
            threshold,
        } => {
            let g = cooc_graph(&images, (*class).into(), anchor.as_deref(), *threshold)?;
            run.write("cooc.tsv", g.to_text())?;
            run.write("cooc.json", serde_json::to_string_pretty(&g)? + "\n")?;
            println!("{} nodes, {} edges", g.nodes.len(), g.edges.len());
        }
        Stat::Ratio { tag } => {
            let mut text = String::from("tag\tprivate_share\n");
            for t in tag {
                writeln!(text, "{t}\t{:.6}", private_public_ratio(&images, t)?)?;
            }
            run.write("ratio.tsv", text)?;
        }
        Stat::Cloud { class, top } => run.write("cloud.tsv", cloud_tsv(&images, (*class).into(), *top)?)?,
    }
    run.config(serde_json::json!({ "stat": name, "images": images.len() }))?;
    Ok(())
}

fn fuse(command: &Command, a: &FuseArgs) -> Result<()> {
    let records = corpus(&a.corpus)?;
    check_block(&records, &a.block)?;
    let tags = tag_options(&a.tags);
    let train = training_side(&records, a.split.as_deref())?;
    let vocab = fusion_vocab(&train, &tags, a.top_tags)?;
    let fused_name = format!("{}+tags", a.block);
    let mut fused = records.clone();
    for r in &mut fused {
        let bits = bot_encode(&r.tags(tags.pool, tags.k_deep), &vocab);
        let values = fuse_features(r.block(&a.block)?, &bits);
        r.features.insert(fused_name.clone(), values);
    }
    let run = Run::start(command, &a.out)?;
    save_corpus(run.dir.join("fused.jsonl"), &fused)?;
    vocab.save(run.dir.join("vocab.txt"))?;
    run.config(serde_json::json!({ "block": fused_name, "tags": vocab.len() }))?;
    println!("added block {fused_name} with {} tag bits", vocab.len());
    Ok(())
}

fn file_label(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn vector_line(name: &str, values: &[f64]) -> String {
    let mut line = name.to_string();
    for v in values {
        write!(line, "\t{v}").unwrap();
    }
    line.push('\n');
    line
}

fn baseline(command: &Command, kind: &Baseline) -> Result<()> {
    match kind {
        Baseline::Gist { images, out } => {
            let bank = GaborBank::default();
            let mut text = String::new();
            for path in images {
                let img = load_pgm(path).with_context(|| format!("reading {}", path.display()))?;
                text.push_str(&vector_line(&file_label(path), &gist_extract(&img, &bank)?));
            }
            let run = Run::start(command, out)?;
            run.write("gist.tsv", text)?;
            run.config(serde_json::json!({ "images": images.len(), "kernel_size": bank.size }))?;
        }
        Baseline::Bovw {
            descriptors,
            out,
            k,
            seed,
            dim,
        } => {
            let sets = descriptors
                .iter()
                .map(|p| load_descriptors(p, *dim).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let all: Vec<Vec<f64>> = sets.iter().flatten().cloned().collect();
            let fit = kmeans_fit(&all, *k, *seed)?;
            let mut text = String::new();
            for (path, set) in descriptors.iter().zip(&sets) {
                text.push_str(&vector_line(&file_label(path), &bovw_encode(set, &fit.vocab)?));
            }
            let run = Run::start(command, out)?;
            run.write("bovw.tsv", text)?;
            run.write("vocab.json", serde_json::to_string(&fit)? + "\n")?;
            run.config(serde_json::json!({ "descriptors": all.len(), "iterations": fit.iterations }))?;
        }
        Baseline::Rule {
            corpus: path,
            out,
            person_tags,
            threshold,
        } => {
            let records = corpus(path)?;
            let spec = ModelSpec::Rule {
                person_tags: RulePolicy::new(person_tags.iter().cloned())?,
                tags: TagOptions {
                    pool: picpriv::TagPool::User,
                    k_deep: 0,
                },
            };
            let all: Vec<&ImageRecord> = records.iter().collect();
            let trained = train_model(&spec, &all, 0)?;
            let scores = score_model(&spec, &trained, &all)?;
            let report = scores.report(*threshold)?;
            let run = Run::start(command, out)?;
            run.write("scores.tsv", scores.to_tsv())?;
            let mut table = Vec::new();
            write_report_table(&mut table, &[("rule".to_string(), report)])?;
            run.write("report.tsv", table)?;
            run.config(&spec)?;
            println!(
                "rule: accuracy {:.2}%, overall F1 {:.4}",
                100.0 * report.accuracy,
                report.overall.f1
            );
        }
    }
    Ok(())
}
