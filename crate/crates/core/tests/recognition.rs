use vlx::backend::{Capability, CapabilitySet, Gateway, GroundingBox, MockBackend, MockBuilder};
use vlx::extract::{crop, ChoiceSet, Decision, Extractor};
use vlx::image::ImageBuffer;
use vlx::recognition::{
    viewpoint_stats, Method, Outcome, RecognitionTask, Recognizer, RefinementChain, RelationLexicon, StateQuery,
};
use vlx::Error;

const ARTICLES: [&str; 4] = ["a", "the", "this", "that"];

fn scene(id: &str, w: usize, h: usize) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, |x, y| [x as f32 / w as f32, y as f32 / h as f32, ((x ^ y) % 16) as f32 / 15.0])
        .unwrap()
        .with_id(id)
}

fn ask_all(mut b: MockBuilder, image: &str, template: &str, answer: &str) -> MockBuilder {
    for a in ARTICLES {
        b = b.vqa(image, &template.replace("{art}", a), answer);
    }
    b
}

fn recognizer(b: MockBuilder) -> (Recognizer, Gateway) {
    let gw = Gateway::new(b.build());
    (Recognizer::new(Extractor::new(gw.clone())), gw)
}

#[test]
fn tv_room_refinement_reads_the_screen() {
    let tv = "living/crop:120,40,280,160";
    let screen = "living/crop:120,40,280,160/crop:12,10,148,100";
    let b = MockBackend::builder()
        .ground("living", "the television", [120.0, 40.0, 280.0, 160.0])
        .ground(tv, "the screen", [12.4, 10.0, 147.2, 99.1]);
    let b = ask_all(b, screen, "what is shown on {art} screen?", "a soccer game");
    let (rec, gw) = recognizer(b);
    let room = scene("living", 320, 200);
    let chain = RefinementChain::new(vec![
        RecognitionTask::location("the television"),
        RecognitionTask::location("the screen"),
        RecognitionTask::mvqa_choice("what is shown on {art} screen?", &["a soccer game", "a news program", "a cooking show"]),
    ])
    .unwrap();
    let r = rec.stepwise_refine(&room, &chain).unwrap();
    assert!(r.complete);
    let chain_coords: Vec<[usize; 4]> = r.box_chain.iter().map(GroundingBox::coords).collect();
    assert_eq!(chain_coords, [[120, 40, 280, 160], [132, 50, 268, 140]]);
    assert_eq!(r.steps[2].outcome.label().as_deref(), Some("a soccer game"));
    assert!(r.steps[2].global_box.is_none());
    assert_eq!(gw.call_count(Capability::Vg), 2);
    assert_eq!(gw.call_count(Capability::Vqa), 20);
    let inner = crop(&room, &r.box_chain[1]).unwrap();
    assert_eq!((inner.width(), inner.height()), (136, 90));
    assert_eq!(inner.pixel(0, 0), room.pixel(132, 50));
}

#[test]
fn refinement_stops_when_grounding_is_empty() {
    let b = MockBackend::builder()
        .ground("living", "the television", [10.0, 10.0, 50.0, 40.0])
        .ground_nothing("living/crop:10,10,50,40", "the remote");
    let (rec, gw) = recognizer(b);
    let chain = RefinementChain::new(vec![
        RecognitionTask::location("the television"),
        RecognitionTask::location("the remote"),
        RecognitionTask::state_question("is {art} remote on?"),
    ])
    .unwrap();
    let r = rec.stepwise_refine(&scene("living", 64, 64), &chain).unwrap();
    assert!(!r.complete);
    assert_eq!(r.steps.len(), 1);
    assert_eq!(r.box_chain.len(), 1);
    assert!(r.error.unwrap().contains("the remote"));
    assert_eq!(gw.call_count(Capability::Vqa), 0);
}

#[test]
fn chains_reject_non_grounding_steps_before_the_last() {
    let err = RefinementChain::new(vec![
        RecognitionTask::state_question("is {art} tv on?"),
        RecognitionTask::location("the screen"),
    ])
    .unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
    assert!(RefinementChain::new(Vec::new()).is_err());
}

#[test]
fn kettle_handle_affordance() {
    let b = MockBackend::builder()
        .ground("kitchen", "handle of the kettle", [200.6, 80.2, 240.0, 130.9])
        .ground("kitchen", "spout of the kettle", [150.0, 60.0, 175.0, 85.0]);
    let (rec, _) = recognizer(b);
    let img = scene("kitchen", 320, 240);
    let handle = rec.recognize_affordance(&img, "kettle", "handle").unwrap();
    assert_eq!(handle.coords(), [200, 80, 240, 131]);
    let task = RecognitionTask::Affordance {
        method: Method::Vg,
        object: "kettle".into(),
        part: "spout".into(),
    };
    let o = rec.run_task(&img, &task).unwrap();
    assert_eq!(o.region().unwrap().coords(), [150, 60, 175, 85]);
}

#[test]
fn out_of_frame_boxes_are_clamped() {
    let b = MockBackend::builder()
        .ground("shelf", "the cup", [-5.0, 10.0, 70.0, 90.0])
        .ground("shelf", "the plate", [70.0, 70.0, 90.0, 95.0]);
    let (rec, _) = recognizer(b);
    let img = scene("shelf", 64, 48);
    assert_eq!(rec.locate_object(&img, "the cup").unwrap().coords(), [0, 10, 64, 48]);
    assert!(matches!(rec.locate_object(&img, "the plate"), Err(Error::GroundingEmpty(_))));
}

#[test]
fn relations_prefer_longest_phrases() {
    let mut b = MockBackend::builder();
    let answers = ["The mug is on top of the keyboard.", "on top of it", "it is on the keyboard", "on top of the keys"];
    for (art, answer) in ARTICLES.iter().zip(answers) {
        b = b.vqa("desk", &format!("what is the relative relationship between {art} mug and the keyboard?"), answer);
    }
    let (rec, _) = recognizer(b);
    let r = rec.recognize_relation(&scene("desk", 32, 32), "mug", "keyboard").unwrap();
    assert_eq!(r.relation.as_deref(), Some("on top of"));
    assert_eq!(r.counts["on top of"], 15);
    assert_eq!(r.counts["on"], 5);
    assert_eq!(r.total, 20);
    assert_eq!(r.trials.len(), 20);
}

#[test]
fn relation_ties_and_custom_lexicon() {
    let mut b = MockBackend::builder();
    let answers = ["beside the lamp", "under the lamp", "beside it", "under it"];
    for (art, answer) in ARTICLES.iter().zip(answers) {
        b = b.vqa("desk", &format!("what is the relative relationship between {art} cup and the lamp?"), answer);
    }
    let (rec, _) = recognizer(b);
    let rec = rec.with_lexicon(RelationLexicon::new(["beside", "under"]).unwrap());
    let r = rec.recognize_relation(&scene("desk", 8, 8), "cup", "lamp").unwrap();
    assert!(r.tie);
    assert_eq!(r.relation, None);
}

#[test]
fn object_class_by_mvqa_and_itr() {
    let b = ask_all(MockBackend::builder(), "counter", "what object is included in {art} image?", "a white mug")
        .itr("counter", "a mug", 4.0)
        .itr("counter", "a glass", 1.0)
        .itr("counter", "a bowl", 0.5);
    let (rec, _) = recognizer(b);
    let img = scene("counter", 16, 16);
    let choices = ChoiceSet::new(["mug", "glass", "bowl"]).unwrap();
    let o = rec.recognize_object_class(&img, &choices, Method::Mvqa).unwrap();
    assert_eq!(o.label().as_deref(), Some("mug"));
    assert_eq!(o.correct_rate("mug"), Some(1.0));
    let choices = ChoiceSet::new(["a mug", "a glass", "a bowl"]).unwrap();
    let o = rec.recognize_object_class(&img, &choices, Method::Itr).unwrap();
    assert_eq!(o.label().as_deref(), Some("a mug"));
    let p = o.correct_rate("a mug").unwrap();
    let oracle = 4f64.exp() / (4f64.exp() + 1f64.exp() + 0.5f64.exp());
    assert!((p - oracle).abs() < 1e-12);
    assert!(rec.recognize_object_class(&img, &choices, Method::Bvqa).is_err());
}

#[test]
fn features_use_attribute_questions() {
    let b = ask_all(MockBackend::builder(), "fruit", "what color is {art} object?", "it looks yellow");
    let b = ask_all(b, "fruit", "how big is {art} object?", "small");
    let (rec, _) = recognizer(b);
    let img = scene("fruit", 16, 16);
    let color = rec
        .recognize_feature(&img, "color", &ChoiceSet::new(["red", "yellow", "green"]).unwrap(), Method::Mvqa)
        .unwrap();
    assert_eq!(color.label().as_deref(), Some("yellow"));
    let size = rec
        .recognize_feature(&img, "size", &ChoiceSet::new(["small", "large"]).unwrap(), Method::Mvqa)
        .unwrap();
    assert_eq!(size.label().as_deref(), Some("small"));
}

#[test]
fn door_state_by_question_and_by_retrieval() {
    let b = ask_all(MockBackend::builder(), "hall", "is {art} door open?", "Yes")
        .itr("hall", "an open door", 2.0)
        .itr("hall", "a closed door", 2.0)
        .itr("garage", "an open door", -1.0)
        .itr("garage", "a closed door", 1.5);
    let (rec, _) = recognizer(b);
    let hall = scene("hall", 16, 16);
    let q = StateQuery::Question(rec.template("is {art} door open?").unwrap());
    assert_eq!(rec.recognize_state(&hall, &q).unwrap().decision, Decision::Yes);
    let pair = StateQuery::Pair(ChoiceSet::new(["an open door", "a closed door"]).unwrap());
    let tied = rec.recognize_state(&hall, &pair).unwrap();
    assert_eq!(tied.decision, Decision::Undecided);
    assert_eq!(tied.yes_ratio, 0.5);
    let garage = rec.recognize_state(&scene("garage", 16, 16), &pair).unwrap();
    assert_eq!(garage.decision, Decision::No);
    assert!(garage.tally.is_none());
}

#[test]
fn reading_room_numbers() {
    let mut b = MockBackend::builder();
    let answers = ["203", "Room 203", "203.", "208"];
    for (art, answer) in ARTICLES.iter().zip(answers) {
        b = b.vqa("plate", &format!("what number is written on {art} plate?"), answer);
    }
    let (rec, _) = recognizer(b);
    let task = RecognitionTask::StateCharacter {
        method: Method::Mvqa,
        template: "what number is written on {art} plate?".into(),
    };
    let o = rec.run_task(&scene("plate", 16, 16), &task).unwrap();
    let Outcome::Text(t) = &o else { panic!("expected text, got {o:?}") };
    assert_eq!(t.answer, "203");
    assert_eq!(t.support, 10);
    assert_eq!(o.correct_rate("203"), Some(0.5));
}

#[test]
fn viewpoint_statistics_across_views() {
    let mut b = MockBackend::builder();
    for (view, answer) in [("v0", "a mug"), ("v1", "a mug"), ("v2", "a glass"), ("v3", "mug")] {
        b = ask_all(b, view, "what object is included in {art} image?", answer);
    }
    let (rec, _) = recognizer(b);
    let task = RecognitionTask::object_class(Method::Mvqa, &["mug", "glass"]);
    let rates: Vec<f64> = ["v0", "v1", "v2", "v3"]
        .iter()
        .map(|v| rec.run_task(&scene(v, 8, 8), &task).unwrap().correct_rate("mug").unwrap())
        .collect();
    let s = viewpoint_stats(&rates).unwrap();
    assert_eq!(s.rates, [1.0, 1.0, 0.0, 1.0]);
    assert_eq!(s.mean, 0.75);
    assert!((s.std - 0.75f64.sqrt() * 0.5).abs() < 1e-12);
}

#[test]
fn capability_gaps_surface_per_task() {
    let b = MockBackend::builder().capabilities(CapabilitySet::only([Capability::Vqa]));
    let (rec, _) = recognizer(b);
    let err = rec.locate_object(&scene("x", 4, 4), "cup").unwrap_err();
    assert!(matches!(err, Error::CapabilityUnsupported(Capability::Vg)));
}
