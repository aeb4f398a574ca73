//! Acceptance checks. Each criterion prints one PASS/FAIL line; the binary
//! exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mole::corpus::{Document, QualityFacet};
use mole::counterfactual::{
    assign_facets, build_contrastive_dataset, render_issue_prompt, render_rewrite_prompt,
    GenerationConfig,
};
use mole::evaluator::{
    cls_loss, ctr_loss, joint_loss, joint_loss_and_grad, predict_grade, train, ClassDistribution,
    LabeledExample, ModelConfig, ModelParams, PairExample, TokenSequence, TrainConfig,
};
use mole::llm_client::{FacetMockTransport, LlmClient};
use mole::metrics::{
    accuracy, evaluate, f1_scores, kendall_tau, qwk, self_bleu, spearman, ttr, PairedScores,
};
use mole::synth::{synth_corpus, synth_split, SynthConfig};

use common::*;

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("metric oracle equivalence", metric_oracles),
        ("analytic loss values", analytic_losses),
        ("gradient correctness", gradient_check),
        ("ablation identity", ablation_identity),
        ("synthetic MOLE vs Origin", mole_vs_origin),
        ("prompt fidelity", prompt_fidelity),
        ("pipeline idempotence", pipeline_idempotence),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let spent = start.elapsed();
    ensure(spent < limit, || format!("took {spent:?}, limit {limit:?}"))
}

const ORACLE_TOL: f64 = 1e-12;

fn close(label: &str, got: Option<f64>, want: Option<f64>) -> Result<(), String> {
    match (got, want) {
        (None, None) => Ok(()),
        (Some(a), Some(b)) if (a - b).abs() <= ORACLE_TOL => Ok(()),
        _ => Err(format!("{label}: got {got:?}, oracle {want:?}")),
    }
}

fn grades(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..5u8)).collect()
}

fn text(rng: &mut ChaCha8Rng, max_words: usize, vocab: &[&str]) -> String {
    let n = rng.random_range(0..=max_words);
    let mut s = String::new();
    for _ in 0..n {
        let w = vocab[rng.random_range(0..vocab.len())];
        let w = if rng.random_bool(0.2) {
            w.to_uppercase()
        } else {
            w.to_string()
        };
        s.push_str(&w);
        s.push_str([" ", ", ", ". ", "  ", "-"][rng.random_range(0..5)]);
    }
    s
}

fn metric_oracles() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let vocab = [
        "the", "cat", "sat", "on", "mat", "a", "dog", "ran", "far", "x1",
    ];
    let instances = 1000;
    for case in 0..instances {
        let n = rng.random_range(1..=20);
        let gold = grades(&mut rng, n);
        let pred = grades(&mut rng, n);
        let gf: Vec<f64> = gold.iter().map(|&g| f64::from(g)).collect();
        let pf: Vec<f64> = pred.iter().map(|&g| f64::from(g)).collect();
        let scores = PairedScores::new(gf.clone(), pf.clone()).map_err(|e| e.to_string())?;
        let tag = |m: &str| format!("{m} case {case} gold {gold:?} pred {pred:?}");

        close(
            &tag("spearman"),
            spearman(&scores).ok(),
            spearman_oracle(&gf, &pf),
        )?;
        close(
            &tag("kendall_tau"),
            kendall_tau(&scores).ok(),
            kendall_oracle(&gf, &pf),
        )?;
        close(
            &tag("qwk"),
            qwk(&gold, &pred, 5).ok(),
            qwk_oracle(&gold, &pred, 5),
        )?;
        close(
            &tag("accuracy"),
            accuracy(&gold, &pred).ok(),
            Some(accuracy_oracle(&gold, &pred)),
        )?;
        let f1 = f1_scores(&gold, &pred, 5).map_err(|e| e.to_string())?;
        let (per_class, macro_f1) = f1_oracle(&gold, &pred, 5);
        for c in 0..5 {
            close(&tag("f1"), Some(f1.per_class[c]), Some(per_class[c]))?;
        }
        close(&tag("macro_f1"), Some(f1.macro_f1), Some(macro_f1))?;

        let t = text(&mut rng, 20, &vocab);
        close(&format!("ttr on {t:?}"), ttr(&t).ok(), ttr_oracle(&t))?;

        let docs: Vec<String> = (0..rng.random_range(2..=5))
            .map(|_| text(&mut rng, 20, &vocab))
            .collect();
        close(
            &format!("self_bleu on {docs:?}"),
            self_bleu(&docs, 4).ok(),
            Some(self_bleu_oracle(&docs, 4)),
        )?;
    }
    within(Duration::from_secs(10), start)?;
    Ok(format!(
        "{instances} random instances per metric within {ORACLE_TOL:e}"
    ))
}

fn zero_model() -> ModelParams {
    ModelParams::zeros(ModelConfig {
        vocab_size: 32,
        hidden_dim: 4,
        ..ModelConfig::default()
    })
}

fn analytic_losses() -> Result<String, String> {
    let ln2 = std::f64::consts::LN_2;
    let ln5 = 5f64.ln();
    for s in [-3.0, 0.0, 0.25, 7.5] {
        let v = ctr_loss(s, s).map_err(|e| e.to_string())?;
        ensure((v - ln2).abs() <= 1e-12, || {
            format!("ctr_loss({s},{s}) = {v}")
        })?;
    }
    for g in 0..=4 {
        let v = cls_loss(&ClassDistribution::uniform(), g).map_err(|e| e.to_string())?;
        ensure((v - ln5).abs() <= 1e-12, || {
            format!("cls_loss(uniform, {g}) = {v}")
        })?;
    }
    let p = zero_model();
    let t = p.tokenizer();
    let labeled = [LabeledExample {
        tokens: t.tokenize("an article"),
        grade: 1,
    }];
    let pairs = [PairExample {
        higher: t.tokenize("a better article"),
        lower: t.tokenize("an article"),
    }];
    let l = joint_loss(&labeled, &pairs, &p, 10.0).map_err(|e| e.to_string())?;
    let want = ln5 + 10.0 * ln2;
    ensure((l.total - want).abs() <= 1e-10, || {
        format!("joint loss {} vs {want}", l.total)
    })?;
    Ok(format!("joint loss {:.12} = ln 5 + 10 ln 2", l.total))
}

fn random_tokens(rng: &mut ChaCha8Rng, vocab: usize) -> TokenSequence {
    let n = rng.random_range(2..=7);
    TokenSequence::new((0..n).map(|_| rng.random_range(0..vocab as u32)).collect())
        .expect("non-empty")
}

fn gradient_check() -> Result<String, String> {
    let start = Instant::now();
    let config = ModelConfig {
        vocab_size: 50,
        hidden_dim: 8,
        init_scale: 0.5,
        ..ModelConfig::default()
    };
    let mut params = ModelParams::init(config, 17);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    // Non-zero biases so their gradients are exercised off the origin.
    params
        .encoder_bias
        .mapv_inplace(|_| rng.random_range(-0.3..0.3));
    params
        .class_bias
        .mapv_inplace(|_| rng.random_range(-0.3..0.3));
    params.contrast_bias = 0.2;
    let labeled: Vec<LabeledExample> = (0..4)
        .map(|i| LabeledExample {
            tokens: random_tokens(&mut rng, 50),
            grade: (i * 3 % 5) as u8,
        })
        .collect();
    let pairs: Vec<PairExample> = (0..4)
        .map(|_| PairExample {
            higher: random_tokens(&mut rng, 50),
            lower: random_tokens(&mut rng, 50),
        })
        .collect();
    let c = 10.0;
    let (_, grads) =
        joint_loss_and_grad(&labeled, &pairs, &params, c).map_err(|e| e.to_string())?;

    let h = 1e-4;
    let floor = 1e-7;
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for (block, (name, analytic)) in grads.blocks().iter().enumerate() {
        for k in 0..analytic.len() {
            let loss_at = |delta: f64| {
                let mut p = params.clone();
                p.blocks_mut()[block].1[k] += delta;
                joint_loss(&labeled, &pairs, &p, c).expect("finite").total
            };
            let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if rel > worst.0 {
                worst = (
                    rel,
                    format!("{name}[{k}] analytic {a:e} numeric {numeric:e}"),
                );
            }
            checked += 1;
        }
    }
    ensure(worst.0 <= 1e-3, || {
        format!("relative error {:e} at {}", worst.0, worst.1)
    })?;
    within(Duration::from_secs(30), start)?;
    Ok(format!(
        "{checked} coordinates, worst relative error {:.2e}",
        worst.0
    ))
}

fn mock_pairs(docs: &[Document], seed: u64) -> Vec<mole::corpus::ContrastivePair> {
    let client = LlmClient::new(FacetMockTransport::new());
    build_contrastive_dataset(
        docs,
        &client,
        &GenerationConfig {
            seed,
            ..GenerationConfig::default()
        },
    )
    .expect("mock generation")
    .pairs
}

fn param_bits(p: &ModelParams) -> Vec<u64> {
    p.blocks()
        .iter()
        .flat_map(|(_, v)| v.iter().map(|x| x.to_bits()))
        .collect()
}

fn ablation_identity() -> Result<String, String> {
    let docs = synth_corpus(&SynthConfig {
        size: 120,
        seed: 11,
        ..SynthConfig::default()
    })
    .documents;
    let pairs = mock_pairs(&docs, 11);
    let cfg = TrainConfig {
        c: 0.0,
        epochs: 8,
        seed: 5,
        ..TrainConfig::default()
    };
    let with_pairs = train(&docs, &pairs, &cfg).map_err(|e| e.to_string())?;
    let without = train(&docs, &[], &cfg).map_err(|e| e.to_string())?;
    ensure(
        param_bits(&with_pairs.params) == param_bits(&without.params),
        || "parameters differ".into(),
    )?;
    let a: Vec<u64> = with_pairs.log.iter().map(|e| e.total.to_bits()).collect();
    let b: Vec<u64> = without.log.iter().map(|e| e.total.to_bits()).collect();
    ensure(a == b, || "joint loss trajectories differ".into())?;
    Ok(format!(
        "{} parameters bit-identical after {} epochs with {} pairs at C = 0",
        with_pairs.params.num_parameters(),
        cfg.epochs,
        pairs.len()
    ))
}

fn test_spearman(params: &ModelParams, test: &[Document]) -> f64 {
    let gold: Vec<u8> = test.iter().map(|d| d.grade.expect("graded")).collect();
    let pred: Vec<u8> = test
        .iter()
        .map(|d| predict_grade(&d.title, &d.body, params).expect("predict").0)
        .collect();
    // A constant predictor has no rank correlation; count it as 0.
    evaluate(&gold, &pred)
        .expect("metrics")
        .spearman
        .unwrap_or(0.0)
}

fn mole_vs_origin() -> Result<String, String> {
    let start = Instant::now();
    let seeds = 5u64;
    let mut gains = Vec::new();
    let mut rows = Vec::new();
    for seed in 0..seeds {
        let split = synth_split(
            &SynthConfig {
                size: 500,
                seed,
                ..SynthConfig::default()
            },
            200,
        );
        let pairs = mock_pairs(&split.train.documents, seed);
        let base = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let origin = train(&split.train.documents, &[], &base).map_err(|e| e.to_string())?;
        let joint = train(&split.train.documents, &pairs, &base).map_err(|e| e.to_string())?;
        let rho_origin = test_spearman(&origin.params, &split.test.documents);
        let rho_joint = test_spearman(&joint.params, &split.test.documents);
        gains.push(rho_joint - rho_origin);
        rows.push(format!("{rho_origin:.3}->{rho_joint:.3}"));
    }
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    within(Duration::from_secs(300), start)?;
    ensure(mean >= 0.02, || {
        format!("mean gain {mean:.4} < 0.02 (per seed {})", rows.join(", "))
    })?;
    Ok(format!(
        "mean Spearman gain {mean:.4} over {seeds} seeds ({})",
        rows.join(", ")
    ))
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn prompt_fidelity() -> Result<String, String> {
    let doc = Document::new(
        "g1",
        "Rivers",
        "Rivers carry water to the sea. Meanwhile the text jumps elsewhere.",
    )
    .with_grade(2);
    let issue = render_issue_prompt(&doc, QualityFacet::Coherence).map_err(|e| e.to_string())?;
    ensure(issue == golden("issue_prompt_coherence.txt"), || {
        format!("issue prompt differs:\n{issue}")
    })?;
    let rewrite =
        render_rewrite_prompt(&doc, "- The second sentence breaks the flow of the first.")
            .map_err(|e| e.to_string())?;
    ensure(rewrite == golden("rewrite_prompt.txt"), || {
        format!("rewrite prompt differs:\n{rewrite}")
    })?;
    ensure(
        issue.starts_with("Given an article quality assessment system"),
        || "issue prefix".into(),
    )?;
    ensure(rewrite.ends_with("**Rewritten Article:**"), || {
        "rewrite suffix".into()
    })?;
    Ok("both prompts byte-match the golden files".into())
}

fn pipeline_idempotence() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus.jsonl");
    let docs = synth_corpus(&SynthConfig {
        size: 12,
        seed: 4,
        ..SynthConfig::default()
    })
    .documents;
    mole::corpus::save_jsonl(&docs, &corpus).map_err(|e| e.to_string())?;
    let out = dir.path().join("gen");
    let args = [
        "mole",
        "generate",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mock",
    ];
    let summary = |path: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(path.join("summary.json")).unwrap()).unwrap()
    };

    mole::cli::run(args).map_err(|e| format!("first run: {e:#}"))?;
    let first = std::fs::read(out.join("pairs.jsonl")).map_err(|e| e.to_string())?;
    let cold_calls = summary(&out)["llm"]["transport_calls"].as_u64();
    mole::cli::run(args).map_err(|e| format!("second run: {e:#}"))?;
    let second = std::fs::read(out.join("pairs.jsonl")).map_err(|e| e.to_string())?;
    let warm_calls = summary(&out)["llm"]["transport_calls"].as_u64();

    ensure(first == second, || "pairs files differ between runs".into())?;
    ensure(cold_calls == Some(2 * docs.len() as u64), || {
        format!("cold run made {cold_calls:?} calls")
    })?;
    ensure(warm_calls == Some(0), || {
        format!("warm run made {warm_calls:?} calls")
    })?;
    Ok(format!(
        "{} byte-identical pair bytes; {} calls cold, 0 warm",
        first.len(),
        cold_calls.unwrap_or(0)
    ))
}

fn determinism() -> Result<String, String> {
    let cfg = SynthConfig {
        size: 100,
        seed: 7,
        ..SynthConfig::default()
    };
    let a = synth_corpus(&cfg);
    let b = synth_corpus(&cfg);
    let ja = serde_json::to_string(&a.documents).unwrap();
    let jb = serde_json::to_string(&b.documents).unwrap();
    ensure(ja == jb && a.degradations == b.degradations, || {
        "synth differs".into()
    })?;

    let fa = assign_facets(&a.documents, 3).map_err(|e| e.to_string())?;
    let fb = assign_facets(&b.documents, 3).map_err(|e| e.to_string())?;
    ensure(fa == fb, || "facet assignment differs".into())?;

    let pairs = mock_pairs(&a.documents, 3);
    let tc = TrainConfig {
        epochs: 4,
        seed: 9,
        ..TrainConfig::default()
    };
    let ta = train(&a.documents, &pairs, &tc).map_err(|e| e.to_string())?;
    let tb = train(&b.documents, &pairs, &tc).map_err(|e| e.to_string())?;
    ensure(param_bits(&ta.params) == param_bits(&tb.params), || {
        "trained parameters differ".into()
    })?;
    ensure(ta.log == tb.log, || "training logs differ".into())?;
    Ok("synth, facet assignment and training repeat bit for bit".into())
}
