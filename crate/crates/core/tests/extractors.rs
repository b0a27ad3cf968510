use vlx::backend::{hash_embedding, Capability, CapabilitySet, Gateway, MockBackend};
use vlx::extract::{AnswerAliases, BinaryLabel, ChoiceSet, Decision, DecisionPolicy, Extractor};
use vlx::image::ImageBuffer;
use vlx::variation::{NoiseConfig, QuestionTemplate};
use vlx::Error;

const ARTICLES: [&str; 4] = ["a", "the", "this", "that"];

fn img(id: &str) -> ImageBuffer {
    ImageBuffer::from_fn(12, 9, |x, y| [x as f32 / 11.0, y as f32 / 8.0, 0.25]).unwrap().with_id(id)
}

fn door() -> QuestionTemplate {
    QuestionTemplate::new("is {art} door open?").unwrap()
}

/// Scripts one answer per (variant, article) so every grid cell is distinguishable.
fn scripted(answers: &[[&str; 4]; 5]) -> MockBackend {
    let mut b = MockBackend::builder();
    for (v, row) in answers.iter().enumerate() {
        for (art, answer) in ARTICLES.iter().zip(row) {
            b = b.vqa_variant("door", v, &format!("is {art} door open?"), answer);
        }
    }
    b.build()
}

#[test]
fn each_grid_cell_is_asked_once() {
    let answers = [
        ["yes", "yes", "no", "yes"],
        ["yes", "maybe", "yes", "yes"],
        ["no", "yes", "yes", "Yes."],
        ["yes", "yes", "I think so", "no"],
        ["yes", "no", "yes", "yes"],
    ];
    let gw = Gateway::new(scripted(&answers));
    let r = Extractor::new(gw.clone()).run_bvqa(&img("door"), &door()).unwrap();
    let t = r.tally.unwrap();
    assert_eq!((t.yes, t.no, t.invalid), (14, 4, 2));
    assert_eq!(r.decision, Decision::Yes);
    assert_eq!(gw.call_count(Capability::Vqa), 20);
    let mut seen: Vec<(usize, String)> = r.trials.iter().map(|t| (t.variant, t.question.clone())).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 20);
}

#[test]
fn parallel_workers_match_serial_order() {
    let answers = [
        ["yes", "no", "no", "yes"],
        ["maybe", "maybe", "yes", "no"],
        ["no", "no", "no", "yes"],
        ["yes", "yes", "yes", "yes"],
        ["no", "", "yes", "no"],
    ];
    let serial = Extractor::new(Gateway::new(scripted(&answers)));
    let parallel = Extractor::new(Gateway::new(scripted(&answers))).with_workers(4);
    let a = serial.run_bvqa(&img("door"), &door()).unwrap();
    let b = parallel.run_bvqa(&img("door"), &door()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trials, b.trials);
}

#[test]
fn policy_and_aliases_change_the_decision() {
    let answers = [["yep", "yep", "nope", "unclear"]; 5];
    let gw = Gateway::new(scripted(&answers));
    let strict = Extractor::new(gw.clone()).run_bvqa(&img("door"), &door()).unwrap();
    assert_eq!(strict.decision, Decision::Undecided);
    assert_eq!(strict.invalid_ratio, 1.0);
    let aliases = AnswerAliases::new()
        .with("yep", BinaryLabel::Yes)
        .unwrap()
        .with("nope", BinaryLabel::No)
        .unwrap();
    let lenient = Extractor::new(gw.clone()).with_aliases(aliases.clone()).run_bvqa(&img("door"), &door()).unwrap();
    assert_eq!(lenient.decision, Decision::Yes);
    assert_eq!(lenient.invalid_ratio, 0.25);
    let demanding = Extractor::new(gw)
        .with_aliases(aliases)
        .with_policy(DecisionPolicy { min_valid_fraction: 0.8 })
        .run_bvqa(&img("door"), &door())
        .unwrap();
    assert_eq!(demanding.decision, Decision::Undecided);
}

#[test]
fn five_five_ten_is_a_tie() {
    let answers = [
        ["yes", "no", "?", "?"],
        ["yes", "no", "?", "?"],
        ["yes", "no", "?", "?"],
        ["yes", "no", "?", "?"],
        ["yes", "no", "?", "?"],
    ];
    let r = Extractor::new(Gateway::new(scripted(&answers))).run_bvqa(&img("door"), &door()).unwrap();
    assert_eq!(r.invalid_ratio, 0.5);
    assert_eq!(r.decision, Decision::Undecided);
}

#[test]
fn mvqa_counts_ambiguous_answers_as_invalid() {
    let mut b = MockBackend::builder();
    for (art, answer) in ARTICLES.iter().zip(["a red cup", "blue", "red or blue", "the red one"]) {
        b = b.vqa("cup", &format!("what color is {art} cup?"), answer);
    }
    let ex = Extractor::new(Gateway::new(b.build()));
    let t = QuestionTemplate::new("what color is {art} cup?").unwrap();
    let r = ex.run_mvqa(&img("cup"), &t, &ChoiceSet::new(["red", "blue"]).unwrap()).unwrap();
    assert_eq!(r.tally.per_choice, [10, 5]);
    assert_eq!(r.tally.invalid, 5);
    assert_eq!(r.selected_phrase.as_deref(), Some("red"));
}

#[test]
fn itr_ensemble_queries_every_variant() {
    let gw = Gateway::new(MockBackend::builder().itr("cam", "a cup", 0.0).itr("cam", "a glass", 2.0).build());
    let ex = Extractor::new(gw.clone());
    let choices = ChoiceSet::new(["a cup", "a glass"]).unwrap();
    let single = ex.run_itr(&img("cam"), &choices).unwrap();
    assert_eq!(gw.call_count(Capability::Itr), 1);
    assert_eq!(single.scores, [0.0, 2.0]);
    let ens = ex.run_itr_ensemble(&img("cam"), &choices).unwrap();
    assert_eq!(gw.call_count(Capability::Itr), 6);
    for (a, b) in ens.probabilities.iter().zip(&single.probabilities) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn variant_fixtures_drive_the_ensemble() {
    let mut b = MockBackend::builder();
    for v in 0..5 {
        let cup = if v < 2 { 3.0 } else { 0.0 };
        b = b.itr_variant("cam", v, "a cup", cup).itr_variant("cam", v, "a glass", 1.0);
    }
    let ex = Extractor::new(Gateway::new(b.build()));
    let choices = ChoiceSet::new(["a cup", "a glass"]).unwrap();
    let ens = ex.run_itr_ensemble(&img("cam"), &choices).unwrap();
    let hi = 3f64.exp() / (3f64.exp() + 1f64.exp());
    let lo = 1.0 / (1.0 + 1f64.exp());
    let oracle = (2.0 * hi + 3.0 * lo) / 5.0;
    assert!((ens.probabilities[0] - oracle).abs() < 1e-12);
    assert!(oracle > 0.5);
    assert_eq!(ens.selected, 0);
}

#[test]
fn dic_uses_caption_embeddings() {
    let gw = Gateway::new(
        MockBackend::builder()
            .caption("before", "a closed shelf")
            .caption("after", "a shelf with dishes and an open door")
            .build(),
    );
    let r = Extractor::new(gw.clone()).run_dic(&img("before"), &img("after"), 0.8).unwrap();
    assert!(r.changed);
    assert!(r.similarity < 0.8);
    assert_eq!(gw.call_count(Capability::Caption), 2);
    assert_eq!(gw.call_count(Capability::Embed), 2);
    let a = hash_embedding("a closed shelf", 256);
    let b = hash_embedding("a shelf with dishes and an open door", 256);
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    assert!((r.similarity - dot).abs() < 1e-12);
    assert!(Extractor::new(gw.clone()).run_dic(&img("before"), &img("after"), 1.5).is_err());
}

#[test]
fn missing_fixtures_and_capabilities_are_errors() {
    let gw = Gateway::new(MockBackend::builder().vqa("door", "is a door open?", "yes").build());
    assert!(matches!(
        Extractor::new(gw).run_bvqa(&img("door"), &door()),
        Err(Error::FixtureMiss { .. })
    ));
    let gw = Gateway::new(MockBackend::builder().capabilities(CapabilitySet::only([Capability::Vqa])).build());
    assert!(matches!(
        Extractor::new(gw).run_itr(&img("door"), &ChoiceSet::new(["a", "b"]).unwrap()),
        Err(Error::CapabilityUnsupported(Capability::Itr))
    ));
}

#[test]
fn noise_config_sets_grid_size() {
    let answers = [["yes"; 4]; 5];
    let gw = Gateway::new(scripted(&answers));
    let ex = Extractor::new(gw.clone()).with_noise(NoiseConfig::default().with_variants(3));
    let r = ex.run_bvqa(&img("door"), &door()).unwrap();
    assert_eq!(r.tally.unwrap().total(), 12);
    assert_eq!(gw.call_count(Capability::Vqa), 12);
}
