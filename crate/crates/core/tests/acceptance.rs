//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use concap::backends::scripted::PairScoreEntry;
use concap::backends::{
    AlignmentLogits, Backend, BackendError, Endpoint, Gateway, MockBackend, PosTag, PosTags, ScriptedBackend,
    ScriptedFixture,
};
use concap::curation::{
    assign_misalignment, select_hard_corpus, AssignmentContext, EventGatePolicy, RELATION_KEYWORDS,
};
use concap::dataset::{entailment_dataset, StatsReport};
use concap::eval::{
    argmax_lowest, average_precision, eval_entailment, p_yes, parse_recast, render_recast_prompt, roc_auc,
    PositiveSet, RunMetadata,
};
use concap::genfilter::prompts::template;
use concap::genfilter::{contrast_contradiction_filter, nle_faithfulness_filter, parse_generation, FilterDecision};
use concap::types::{
    CaptionInstance, ContrastRecord, FilterScores, FrameRef, MisalignmentType, Source, Split, VideoRef,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const AUC_TOLERANCE: f64 = 1e-9;
const AUC_TIME_LIMIT_SECS: f64 = 2.0;
const AP_TOLERANCE: f64 = 1e-9;
const CHI_SQUARED_MIN_P: f64 = 0.01;
const PLANTED_OVERALL_TOLERANCE: f64 = 0.02;
const PLANTED_PER_TYPE_TOLERANCE: f64 = 0.03;
const ORACLE_PAIRS: usize = 10_000;
const PLANTED_RECORDS_PER_TYPE: usize = 1_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn video(id: &str, source: Source) -> VideoRef {
    VideoRef::new(id, source, vec![FrameRef::from(format!("{id}/00.jpg").as_str())])
}

fn record(i: usize, m: MisalignmentType, caption: String, contrast: String) -> ContrastRecord {
    let event = m == MisalignmentType::EventOrder;
    ContrastRecord {
        instance_id: format!("{i:08}"),
        video: video(&format!("vid{i}"), Source::Msrvtt),
        caption,
        contrast_caption: contrast,
        nle: "differs".into(),
        misalignment: m,
        source_span: (!event).then(|| "a".into()),
        target_span: (!event).then(|| "b".into()),
        split: Split::Test,
        filter_scores: FilterScores {
            contrast_nli: Some(0.1),
            nle_nli: Some(0.9),
        },
    }
}

fn pairwise_auc(scored: &[(f64, bool)]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for &(p, lp) in scored {
        for &(n, ln) in scored {
            if lp && !ln {
                pairs += 1.0;
                credit += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    credit / pairs
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=50);
        let mut scored: Vec<(f64, bool)> = (0..n)
            .map(|_| (rng.random_range(0..12) as f64 / 11.0, rng.random_bool(0.5)))
            .collect();
        scored[0].1 = true;
        scored[1].1 = false;
        let fast = roc_auc(&scored).map_err(|e| e.to_string())?;
        worst = worst.max((fast - pairwise_auc(&scored)).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let summary = format!("max |err| {worst:.1e} over 200 sets, {:.0} ms", elapsed * 1e3);
    if worst <= AUC_TOLERANCE && elapsed < AUC_TIME_LIMIT_SECS {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn definition_ap(ranking: &[usize], relevant: &BTreeSet<usize>) -> f64 {
    let precisions: Vec<f64> = ranking
        .iter()
        .enumerate()
        .filter(|(_, item)| relevant.contains(item))
        .map(|(k, _)| {
            let top = &ranking[..=k];
            top.iter().filter(|x| relevant.contains(x)).count() as f64 / top.len() as f64
        })
        .collect();
    precisions.iter().sum::<f64>() / relevant.len() as f64
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=30);
        let mut ranking: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            ranking.swap(i, rng.random_range(0..=i));
        }
        let mut relevant: BTreeSet<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
        relevant.insert(ranking[rng.random_range(0..n)]);
        let got = average_precision(&ranking, &relevant).map_err(|e| e.to_string())?;
        worst = worst.max((got - definition_ap(&ranking, &relevant)).abs());
    }
    let ranking = ["r1", "r2", "r3", "r4"];
    let relevant: BTreeSet<&str> = ["r1", "r3"].into();
    let hand = average_precision(&ranking, &relevant).map_err(|e| e.to_string())?;
    let expected = (1.0 + 2.0 / 3.0) / 2.0;
    let summary = format!("max |err| {worst:.1e} over 200 rankings; ranks 1,3 of 4 -> {hand:.4}");
    if worst <= AP_TOLERANCE && (hand - expected).abs() <= AP_TOLERANCE {
        Ok(summary)
    } else {
        Err(summary)
    }
}

/// (contrast caption, source, target, explanation) as printed in each
/// template's worked examples.
type Expected = (&'static str, Option<&'static str>, Option<&'static str>, &'static str);

fn expected_blocks() -> Vec<(MisalignmentType, Vec<Expected>)> {
    use MisalignmentType::*;
    vec![
        (
            Object,
            vec![
                (
                    "a smartphone and a toe pointing to the bluetooth buttons",
                    Some("finger"),
                    Some("toe"),
                    "a finger is pointing to the bluetooth buttons instead of a toe",
                ),
                (
                    "woman plays a song on the cello",
                    Some("piano"),
                    Some("cello"),
                    "woman plays a song on the piano instead of cello",
                ),
                (
                    "a man is going in the bicycle",
                    Some("wheel skate"),
                    Some("bicycle"),
                    "a man is going in the wheel skate instead of the bicycle",
                ),
            ],
        ),
        (
            Action,
            vec![
                (
                    "a person driving the car",
                    Some("repairing"),
                    Some("driving"),
                    "a person is repairing the car instead of the driving it",
                ),
                ("a woman is yelling", Some("singing"), Some("yelling"), "a woman is singing instead of yelling"),
                (
                    "an animated cartoon of a monster throwing a man by the foot and then launching him like a slingshot",
                    Some("catching a man"),
                    Some("throwing a man"),
                    "a monster is catching a man instead of throwing a man",
                ),
                (
                    "a robot is leaving a hall talking to a person",
                    Some("entering"),
                    Some("leaving"),
                    "a robot is entering a hall not leaving it",
                ),
            ],
        ),
        (
            Attribute,
            vec![
                (
                    "man in red shirt is test driving his new car",
                    Some("blue"),
                    Some("red"),
                    "a man in blue shirt instead of the red shirt",
                ),
                (
                    "a group of people playing with small beach balls",
                    Some("giant"),
                    Some("small"),
                    "a group of people playing with giant beach balls instead of the small beach balls",
                ),
                (
                    "there is a man with happy face looking kindly",
                    Some("serious face looking cruelly"),
                    Some("happy face looking kindly"),
                    "a man is with the serious face looking cruelly instead of the happy face looking kindly",
                ),
            ],
        ),
        (
            Count,
            vec![
                (
                    "a man is entering a room with one surgeon",
                    Some("three surgeons"),
                    Some("one surgeon"),
                    "the man enters the room with three surgeons instead of one surgeon",
                ),
                (
                    "six girls singing on stage on the voice",
                    Some("three girls"),
                    Some("six girls"),
                    "three girls are singing on the voice instead of six girls",
                ),
                (
                    "a video showcasing 2 different peoples reactions to a certain video the video seemed family oriented",
                    Some("6 different peoples reactions"),
                    Some("4 different peoples reactions"),
                    "six different people were showcasing their reactions to a video instead of four different people",
                ),
            ],
        ),
        (
            Relation,
            vec![
                (
                    "people are dancing and singing inside the club",
                    Some("outside"),
                    Some("inside the club"),
                    "people are dancing and singing outside, not inside the club",
                ),
                (
                    "a woman is talking behind a camera",
                    Some("in front of a camera"),
                    Some("behind a camera"),
                    "a woman talks in front of a camera, not behind it",
                ),
                (
                    "a bowl of grey shrimp is shown below a yellow broth",
                    Some("above"),
                    Some("below"),
                    "a bowl of grey shrimp is shown above a yellow broth, not below it",
                ),
                (
                    "a kid flips over a mattress under the trampoline",
                    Some("on a trampoline"),
                    Some("under the trampoline"),
                    "a kid flips the mattress on a trampoline, not under it",
                ),
                (
                    "the objects are placed close to each other",
                    Some("far away"),
                    Some("close"),
                    "the objects are placed far away from each other, instead of close to each other",
                ),
            ],
        ),
        (
            Hallucination,
            vec![
                (
                    "A cola bottle is shown and then it is tossed along with a frisbee",
                    Some("tossed"),
                    Some("tossed along with a frisbee"),
                    "There is no frisbee being tossed",
                ),
                (
                    "A person is playing a video game where they become aggressive and release fireworks towards a woman robot face",
                    Some("aggressive towards"),
                    Some("aggressive and release fireworks towards"),
                    "The person does not release fireworks at woman robot face",
                ),
                (
                    "A man is walking his dog while carrying a surfboard",
                    Some("walking his dog"),
                    Some("walking his dog while carrying a surfboard"),
                    "The man does not carry a surfboard",
                ),
                (
                    "Children are playing in the park near a giant sculpture",
                    Some("playing in the park"),
                    Some("playing in the park near a giant sculpture"),
                    "There is no giant sculpture in the park",
                ),
                (
                    "A woman is reading a book under a parasol",
                    Some("reading a book"),
                    Some("reading a book under a parasol"),
                    "There is no parasol where the woman is reading a book",
                ),
            ],
        ),
        (
            EventOrder,
            vec![
                (
                    "A girl drops something out of her hands and then pretends to sneeze and her friend starts to laugh and drops the phone",
                    None,
                    None,
                    "A girl first sneezes and then drops something out of her hands",
                ),
                (
                    "A girl takes the ball and throws it before the boy throws the ball against a wall",
                    None,
                    None,
                    "A boy is throws the ball against the wall before the girl takes it and throws it",
                ),
                (
                    "A small crowd watches a competitor walk to the starting mark, then perform a triple jump",
                    None,
                    None,
                    "A competitor performs the triple jump before walking back to the starting mark",
                ),
                (
                    "A man wearing a black t-shirt moves around a piece of food in his left hand to play with the ostrich before holding a cup of food in his right hand.",
                    None,
                    None,
                    "A man is holding a cup of food before he moves around a piece of food to play with the ostrich",
                ),
                (
                    "A person is playing in the doorway, then they grab a doorknob and leave the room, and then they begin laughing.",
                    None,
                    None,
                    "They begin laughing before they grabbed the doorknob and leave the room.",
                ),
            ],
        ),
    ]
}

/// Worked-example blocks of a template: paragraphs before the final
/// instruction that start with an input sentence.
fn example_blocks(text: &str) -> Vec<&str> {
    let body = text.rsplit_once("Now it's your turn.").map_or(text, |(head, _)| head);
    body.split("\n\n")
        .filter(|b| b.trim_start().starts_with("Input Sentence:"))
        .collect()
}

fn criterion_3() -> Outcome {
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for (m, expected) in expected_blocks() {
        let blocks = example_blocks(template(m));
        if blocks.len() != expected.len() {
            mismatches.push(format!("{m}: {} blocks, expected {}", blocks.len(), expected.len()));
            continue;
        }
        for (i, (block, want)) in blocks.iter().zip(&expected).enumerate() {
            checked += 1;
            match parse_generation(m, block) {
                Ok(p) => {
                    let got = (
                        p.contrast_caption.as_str(),
                        p.source_span.as_deref(),
                        p.target_span.as_deref(),
                        p.nle.as_str(),
                    );
                    if got != *want {
                        mismatches.push(format!("{m} block {}: got {got:?}", i + 1));
                    }
                }
                Err(e) => mismatches.push(format!("{m} block {}: {e}", i + 1)),
            }
        }
    }

    let choices: Vec<String> = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
    let prompt = render_recast_prompt("q", &choices).map_err(|e| e.to_string())?;
    let sections: Vec<&str> = prompt.split("Imperative Statements for every option:\n").collect();
    let in_context = &sections[1..sections.len() - 1];
    let mut white_dog = None;
    for section in in_context {
        let statements = section.split("\n\n").next().unwrap_or("");
        match parse_recast(statements) {
            Ok(parsed) => {
                if parsed[1].starts_with("white dog") {
                    white_dog = Some(parsed[1].clone());
                }
            }
            Err(e) => mismatches.push(format!("recast example: {e}")),
        }
    }
    let white_dog_ok = white_dog.as_deref() == Some("white dog shakes its body after going to the cushion");
    if !white_dog_ok {
        mismatches.push(format!("recast (B): {white_dog:?}"));
    }
    let summary = format!(
        "{checked} generation blocks and {} recast examples checked",
        in_context.len()
    );
    if mismatches.is_empty() && checked >= 18 {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", mismatches.join("; ")))
    }
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

const GOLDEN_FILES: &[&str] = &[
    "scored.jsonl",
    "hard.jsonl",
    "assigned.jsonl",
    "contrasts.jsonl",
    "filtered.jsonl",
    "entailment.jsonl",
    "nle.jsonl",
    "stats.json",
    "stats.txt",
];

fn golden_run(out: &Path, cap: usize) -> Result<BTreeMap<&'static str, Vec<u8>>, String> {
    let fixtures = golden_dir();
    let backend = fixtures.join("backend.json");
    let corpus = fixtures.join("corpus.jsonl");
    let o = |name: &str| out.join(name).display().to_string();
    let stages: Vec<Vec<String>> = vec![
        vec!["score-temporal".into(), "--input".into(), corpus.display().to_string()],
        vec!["select-hard".into(), "--input".into(), o("scored.jsonl")],
        vec!["assign".into(), "--input".into(), o("hard.jsonl")],
        vec!["generate".into(), "--input".into(), o("assigned.jsonl")],
        vec!["filter".into(), "--input".into(), o("contrasts.jsonl")],
        vec![
            "build".into(),
            "--input".into(),
            o("filtered.jsonl"),
            "--attrition".into(),
            o("filtered.jsonl.manifest.json"),
        ],
    ];
    for stage in stages {
        let mut args: Vec<String> = vec![
            "concap".into(),
            "--quiet".into(),
            "--backend".into(),
            "scripted".into(),
            "--fixture".into(),
            backend.display().to_string(),
            "--concurrency".into(),
            cap.to_string(),
            "--output-dir".into(),
            out.display().to_string(),
        ];
        args.extend(stage.iter().cloned());
        let code = concap::cli::run(args);
        if code != 0 {
            return Err(format!("{} exited {code}", stage[0]));
        }
    }
    GOLDEN_FILES
        .iter()
        .map(|name| {
            std::fs::read(out.join(name))
                .map(|bytes| (*name, bytes))
                .map_err(|e| format!("{name}: {e}"))
        })
        .collect()
}

fn line_count(bytes: &[u8]) -> usize {
    bytes.iter().filter(|&&b| b == b'\n').count()
}

fn criterion_4() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reference: Option<BTreeMap<&str, Vec<u8>>> = None;
    let mut runs = 0;
    for cap in [1, 4, 16] {
        for run in 0..5 {
            let out = tmp.path().join(format!("cap{cap}-run{run}"));
            let files = golden_run(&out, cap)?;
            runs += 1;
            match &reference {
                None => reference = Some(files),
                Some(r) => {
                    for name in GOLDEN_FILES {
                        if r[name] != files[name] {
                            return Err(format!("{name} differs at cap {cap}, run {run}"));
                        }
                    }
                }
            }
        }
    }
    let files = reference.unwrap();

    let mut problems = Vec::new();
    let mut expect = |what: &str, got: usize, want: usize| {
        if got != want {
            problems.push(format!("{what}: {got} != {want}"));
        }
    };
    expect("corpus captions", line_count(&files["scored.jsonl"]), 30);
    let challenging = String::from_utf8_lossy(&files["scored.jsonl"])
        .lines()
        .filter(|l| l.contains("\"challenge_flag\":true"))
        .count();
    expect("challenging captions", challenging, 13);
    expect("hard captions", line_count(&files["hard.jsonl"]), 27);
    expect("assigned", line_count(&files["assigned.jsonl"]), 27);
    expect("parsed contrasts", line_count(&files["contrasts.jsonl"]), 24);
    expect("kept after filters", line_count(&files["filtered.jsonl"]), 19);
    expect("entailment examples", line_count(&files["entailment.jsonl"]), 38);
    expect("nle examples", line_count(&files["nle.jsonl"]), 19);

    let stats: StatsReport = serde_json::from_slice(&files["stats.json"]).map_err(|e| e.to_string())?;
    let cell = |source: Source, split: Split| {
        stats
            .counts
            .iter()
            .find(|c| c.source == source && c.split == split)
            .map_or(0, |c| c.nle)
    };
    for (source, split, want) in [
        (Source::Msrvtt, Split::Train, 8),
        (Source::Msrvtt, Split::Val, 3),
        (Source::Msrvtt, Split::Test, 0),
        (Source::Vatex, Split::Train, 1),
        (Source::Vatex, Split::Val, 1),
        (Source::Vatex, Split::Test, 2),
        (Source::Tempo, Split::Train, 2),
        (Source::Tempo, Split::Val, 1),
        (Source::Tempo, Split::Test, 1),
    ] {
        expect(&format!("nle {}/{}", source.token(), split.token()), cell(source, split), want);
    }
    let type_count = |m: MisalignmentType| {
        stats
            .distribution
            .iter()
            .find(|s| s.misalignment == m)
            .map_or(0, |s| s.count)
    };
    expect("relation", type_count(MisalignmentType::Relation), 4);
    expect("count", type_count(MisalignmentType::Count), 4);
    expect("event-order", type_count(MisalignmentType::EventOrder), 4);
    let attrition = stats.attrition.clone().unwrap_or_default();
    expect("attrition parsed", attrition.parsed, 24);
    expect("attrition contradiction", attrition.contradiction_dropped, 3);
    expect("attrition nle", attrition.nle_dropped, 2);

    let summary = format!("{runs} runs over caps {{1, 4, 16}} byte-identical; 30 -> 27 -> 24 -> 19 records");
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", problems.join("; ")))
    }
}

fn criterion_5() -> Outcome {
    let pairs = [
        ("caption", "contrast 051", 0.51),
        ("caption", "contrast 050", 0.50),
        ("premise", "hypothesis", 0.0),
    ];
    let mut fixture = ScriptedFixture::default();
    for (p, h, s) in pairs {
        fixture.nli.push(PairScoreEntry {
            premise: p.into(),
            hypothesis: h.into(),
            score: s,
        });
    }
    let (t, c) = ("three friends traveling together", "two friends traveling together");
    for (e, s) in [("e059", 0.59), ("e060", 0.60)] {
        let (premise, _) = concap::genfilter::format_nle_premise(t, c);
        fixture.nli.push(PairScoreEntry {
            premise,
            hypothesis: concap::genfilter::nle_hypothesis(e),
            score: s,
        });
    }
    let backend = ScriptedBackend::from_fixture("boundaries", fixture)?;
    let gw = Gateway::new(Arc::new(backend), 2);
    let e = |r: Result<FilterDecision, BackendError>| r.map_err(|e| e.to_string());
    let checks = [
        e(contrast_contradiction_filter(&gw, "caption", "contrast 051", 0.5))? == FilterDecision::Drop(0.51),
        e(contrast_contradiction_filter(&gw, "caption", "contrast 050", 0.5))? == FilterDecision::Keep(0.50),
        e(nle_faithfulness_filter(&gw, t, c, "e059", 0.6))? == FilterDecision::Drop(0.59),
        e(nle_faithfulness_filter(&gw, t, c, "e060", 0.6))? == FilterDecision::Keep(0.60),
    ];
    if checks.iter().any(|ok| !ok) {
        return Err(format!("filter boundary checks {checks:?}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut captions = Vec::new();
    let mut sizes = BTreeMap::new();
    for v in 0..200 {
        let n = rng.random_range(1..=12);
        sizes.insert(format!("v{v}"), n);
        for c in 0..n {
            captions.push(CaptionInstance {
                video: video(&format!("v{v}"), Source::Vatex),
                caption: format!("caption {c} of video {v}"),
                split: Split::Train,
                a_vle: Some(rng.random_range(0..10) as f64 / 10.0),
                challenge_flag: None,
            });
        }
    }
    let kept = select_hard_corpus(&captions, 5).map_err(|e| e.to_string())?;
    for (id, &n) in &sizes {
        let kept_scores: Vec<f64> = kept
            .iter()
            .filter(|c| &c.video.video_id == id)
            .filter_map(|c| c.a_vle)
            .collect();
        if kept_scores.len() != n.min(5) {
            return Err(format!("{id}: kept {} of {n}", kept_scores.len()));
        }
        let mut all: Vec<f64> = captions
            .iter()
            .filter(|c| &c.video.video_id == id)
            .filter_map(|c| c.a_vle)
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut got = kept_scores.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if got != all[..n.min(5)] {
            return Err(format!("{id}: kept scores {got:?}, lowest are {:?}", &all[..n.min(5)]));
        }
    }
    Ok(format!(
        "0.51 drop / 0.50 keep, 0.59 drop / 0.60 keep; min(5, n) lowest kept for {} videos",
        sizes.len()
    ))
}

fn criterion_6() -> Outcome {
    use MisalignmentType::*;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let subjects = ["a man", "a woman", "the dog", "a child", "people"];
    let verbs = ["walks", "jumps", "plays", "sings"];
    let objects = ["the ball", "a car", "the guitar", "a hat"];
    let counts = ["one", "two", "three", "seven", "ten", "3", "12"];
    let all_tags: PosTags = [PosTag::Noun, PosTag::Verb, PosTag::Adj].into();
    let mut tempo_freq: BTreeMap<MisalignmentType, usize> = BTreeMap::new();
    let mut violations = Vec::new();

    for i in 0..10_000 {
        let subject = subjects[rng.random_range(0..subjects.len())];
        let verb = verbs[rng.random_range(0..verbs.len())];
        let object = objects[rng.random_range(0..objects.len())];
        let kind = rng.random_range(0..100);
        let caption = match kind {
            0..20 => {
                let kw = RELATION_KEYWORDS[rng.random_range(0..RELATION_KEYWORDS.len())];
                format!("{subject} {verb} {kw} {object}")
            }
            20..40 => format!("{} {subject}s {verb}", counts[rng.random_range(0..counts.len())]),
            _ => format!("{subject} {verb} {object}"),
        };
        let tempo_full = (40..75).contains(&kind);
        let source = if tempo_full {
            Source::Tempo
        } else {
            Source::ALL[rng.random_range(0..4)]
        };
        let pos_tags: PosTags = if tempo_full {
            all_tags.clone()
        } else {
            all_tags.iter().copied().filter(|_| rng.random_bool(0.6)).collect()
        };
        let ctx = AssignmentContext {
            source,
            challenge_flag: rng.random_bool(0.5),
            event_class: Some(if rng.random_bool(0.5) {
                concap::backends::EventClass::Multiple
            } else {
                concap::backends::EventClass::Single
            }),
            pos_tags: pos_tags.clone(),
            rng_seed: rng.random(),
            event_gate: if rng.random_bool(0.5) {
                EventGatePolicy::MultipleOnly
            } else {
                EventGatePolicy::AllChallenging
            },
        };
        let m = assign_misalignment(&caption, &ctx).map_err(|e| format!("{caption}: {e}"))?;
        let excluded = (m == Attribute && !pos_tags.contains(&PosTag::Adj))
            || (m == Action && !pos_tags.contains(&PosTag::Verb))
            || (m == Object && !pos_tags.contains(&PosTag::Noun));
        if kind < 20 && m != Relation {
            violations.push(format!("#{i} `{caption}` -> {m}, expected relation"));
        } else if (20..40).contains(&kind) && m != Count {
            violations.push(format!("#{i} `{caption}` -> {m}, expected count"));
        } else if excluded {
            violations.push(format!("#{i} `{caption}` -> {m} without its POS tag"));
        }
        if tempo_full {
            *tempo_freq.entry(m).or_default() += 1;
        }
    }
    let tempo_types = [Object, Action, Attribute, Hallucination, EventOrder];
    if tempo_freq.keys().any(|m| !tempo_types.contains(m)) {
        violations.push(format!("unexpected TEMPO types {tempo_freq:?}"));
    }
    let total: usize = tempo_freq.values().sum();
    let expected = total as f64 / tempo_types.len() as f64;
    let chi2: f64 = tempo_types
        .iter()
        .map(|m| {
            let o = *tempo_freq.get(m).unwrap_or(&0) as f64;
            (o - expected).powi(2) / expected
        })
        .sum();
    let p = 1.0 - ChiSquared::new((tempo_types.len() - 1) as f64).unwrap().cdf(chi2);
    let summary = format!("10000 assignments; TEMPO chi2 = {chi2:.2} over {total}, p = {p:.3}");
    if violations.is_empty() && p > CHI_SQUARED_MIN_P {
        Ok(summary)
    } else {
        violations.truncate(5);
        Err(format!("{summary}; {}", violations.join("; ")))
    }
}

fn deterministic_runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn criterion_7() -> Outcome {
    let mut runner = deterministic_runner(256);
    let strategy = prop::collection::vec((0usize..7, "[a-z]{1,8}( [a-z]{1,8}){0,4}"), 0..300);
    runner
        .run(&strategy, |rows| {
            let records: Vec<ContrastRecord> = rows
                .iter()
                .enumerate()
                .map(|(i, (m, caption))| {
                    record(i, MisalignmentType::ALL[*m], caption.clone(), format!("{caption} not"))
                })
                .collect();
            let examples = entailment_dataset(&records);
            let positives = examples.iter().filter(|e| e.label == 1 && e.misalignment.is_none()).count();
            let negatives = examples.iter().filter(|e| e.label == 0 && e.misalignment.is_some()).count();
            prop_assert_eq!(examples.len(), 2 * records.len());
            prop_assert_eq!(positives, records.len());
            prop_assert_eq!(negatives, records.len());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("256 random record sets of size 0..300 give N positives and N negatives".into())
}

/// Alignment backend with a high band for captions and a per-type low band
/// for contrast captions, drawn from the seeded mock hash.
struct PlantedBackend {
    mock: MockBackend,
}

fn negative_ceiling(m: MisalignmentType) -> f64 {
    let k = MisalignmentType::ALL.iter().position(|x| *x == m).unwrap() as f64;
    0.45 + 0.05 * k
}

impl Backend for PlantedBackend {
    fn identity(&self) -> String {
        format!("planted(seed={})", self.mock.seed())
    }

    fn call(&self, endpoint: Endpoint, request: &Value) -> Result<Value, BackendError> {
        if endpoint != Endpoint::Align {
            return Err(BackendError::Protocol {
                endpoint,
                reason: "planted backend only serves align".into(),
            });
        }
        let text = request["text"].as_str().unwrap_or_default();
        let u = self.mock.unit_score("planted", request);
        let s_yes = match text.strip_prefix("contrast ") {
            Some(rest) => {
                let token = rest.split_whitespace().next().unwrap_or_default();
                let m: MisalignmentType = token.parse().map_err(|e: concap::types::CoreError| BackendError::Protocol {
                    endpoint,
                    reason: e.to_string(),
                })?;
                negative_ceiling(m) * u
            }
            None => 0.3 + 0.7 * u,
        };
        Ok(json!({"s_yes": s_yes, "s_no": 1.0 - s_yes}))
    }
}

fn planted_score(gw: &Gateway, id: usize, text: &str) -> Result<f64, String> {
    let logits: AlignmentLogits = gw
        .score_alignment(&video(&format!("oracle{id}"), Source::External), text)
        .map_err(|e| e.to_string())?;
    p_yes(logits).map_err(|e| e.to_string())
}

fn monte_carlo_auc(gw: &Gateway, rng: &mut ChaCha8Rng, types: &[MisalignmentType]) -> Result<f64, String> {
    let mut credit = 0.0;
    for _ in 0..ORACLE_PAIRS {
        let a = rng.random_range(0..1_000_000);
        let b = rng.random_range(0..1_000_000);
        let m = types[rng.random_range(0..types.len())];
        let pos = planted_score(gw, a, &format!("caption o{a}"))?;
        let neg = planted_score(gw, b, &format!("contrast {} o{b}", m.token()))?;
        credit += if pos > neg {
            1.0
        } else if pos == neg {
            0.5
        } else {
            0.0
        };
    }
    Ok(credit / ORACLE_PAIRS as f64)
}

fn criterion_8() -> Outcome {
    let gw = Gateway::new(
        Arc::new(PlantedBackend {
            mock: MockBackend::new(8),
        }),
        8,
    );
    let mut records = Vec::new();
    for (k, &m) in MisalignmentType::ALL.iter().enumerate() {
        for j in 0..PLANTED_RECORDS_PER_TYPE {
            let i = k * PLANTED_RECORDS_PER_TYPE + j;
            records.push(record(i, m, format!("caption r{i}"), format!("contrast {} r{i}", m.token())));
        }
    }
    let examples = entailment_dataset(&records);
    let report = eval_entailment(&gw, &examples, PositiveSet::SameTuple, RunMetadata::default())
        .map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let overall_oracle = monte_carlo_auc(&gw, &mut rng, &MisalignmentType::ALL)?;
    let overall = report.metrics["roc_auc"];
    let mut worst_type: f64 = 0.0;
    let mut problems = Vec::new();
    if (overall - overall_oracle).abs() > PLANTED_OVERALL_TOLERANCE {
        problems.push(format!("overall {overall:.4} vs oracle {overall_oracle:.4}"));
    }
    for m in MisalignmentType::ALL {
        let oracle = monte_carlo_auc(&gw, &mut rng, &[m])?;
        let Some(&got) = report.per_misalignment.get(&m) else {
            problems.push(format!("{m}: missing"));
            continue;
        };
        worst_type = worst_type.max((got - oracle).abs());
        if (got - oracle).abs() > PLANTED_PER_TYPE_TOLERANCE {
            problems.push(format!("{m}: {got:.4} vs oracle {oracle:.4}"));
        }
    }
    let summary = format!(
        "AUC {overall:.4} vs oracle {overall_oracle:.4}; worst per-type gap {worst_type:.4} over {} examples",
        examples.len()
    );
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", problems.join("; ")))
    }
}

fn criterion_9() -> Outcome {
    let scored = prop::collection::vec((0u32..64, any::<bool>()), 2..60).prop_filter("both classes", |v| {
        v.iter().any(|(_, l)| *l) && v.iter().any(|(_, l)| !*l)
    });

    deterministic_runner(256)
        .run(&scored, |rows| {
            let base: Vec<(f64, bool)> = rows.iter().map(|&(s, l)| (s as f64 / 64.0, l)).collect();
            let auc = roc_auc(&base).unwrap();
            let flipped: Vec<(f64, bool)> = base.iter().map(|&(s, l)| (s, !l)).collect();
            prop_assert!((roc_auc(&flipped).unwrap() - (1.0 - auc)).abs() < 1e-12);
            for f in [|x: f64| 3.0 * x + 0.5, |x: f64| x.atan(), |x: f64| (4.0 * x).exp()] {
                let moved: Vec<(f64, bool)> = base.iter().map(|&(s, l)| (f(s), l)).collect();
                prop_assert!((roc_auc(&moved).unwrap() - auc).abs() < 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&auc));
            Ok(())
        })
        .map_err(|e| format!("AUC laws: {e}"))?;

    deterministic_runner(256)
        .run(&(0.0f64..100.0, 0.0f64..100.0), |(a, b)| {
            prop_assume!(a + b > 0.0);
            let l = |s_yes, s_no| AlignmentLogits { s_yes, s_no };
            let sum = p_yes(l(a, b)).unwrap() + p_yes(l(b, a)).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            Ok(())
        })
        .map_err(|e| format!("p_yes symmetry: {e}"))?;

    let options = prop::collection::vec((0u32..4, 1u32..4), 5).prop_flat_map(|v| (Just(v), 1u32..1000));
    deterministic_runner(256)
        .run(&options, |(rows, scale)| {
            let logits: Vec<AlignmentLogits> = rows
                .iter()
                .map(|&(y, n)| AlignmentLogits {
                    s_yes: y as f64,
                    s_no: n as f64,
                })
                .collect();
            let scores: Vec<f64> = logits.iter().map(|&l| p_yes(l).unwrap()).collect();
            let best = argmax_lowest(&scores).unwrap();
            let max = scores.iter().cloned().fold(f64::MIN, f64::max);
            let lowest_max = scores.iter().position(|&s| s == max).unwrap();
            prop_assert_eq!(best, lowest_max);
            let c = scale as f64 / 7.0;
            let rescaled: Vec<f64> = logits
                .iter()
                .map(|l| {
                    p_yes(AlignmentLogits {
                        s_yes: c * l.s_yes,
                        s_no: c * l.s_no,
                    })
                    .unwrap()
                })
                .collect();
            prop_assert_eq!(argmax_lowest(&rescaled).unwrap(), best);
            Ok(())
        })
        .map_err(|e| format!("VQA tie-break: {e}"))?;
    Ok("complement, monotone invariance, p_yes symmetry and VQA tie-break hold over 256 cases each".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("ROC-AUC oracle", criterion_1),
        ("mAP oracle", criterion_2),
        ("parser fidelity", criterion_3),
        ("golden pipeline", criterion_4),
        ("threshold boundaries", criterion_5),
        ("assignment laws", criterion_6),
        ("entailment balance", criterion_7),
        ("planted-signal evaluation", criterion_8),
        ("metric laws", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
