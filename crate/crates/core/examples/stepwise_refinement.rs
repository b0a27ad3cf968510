//! Coarse-to-fine recognition: television, then its screen, then what is on it.

use vlx::backend::{Gateway, MockBackend};
use vlx::extract::Extractor;
use vlx::image::ImageBuffer;
use vlx::recognition::{RecognitionTask, Recognizer, RefinementChain};

fn main() -> vlx::Result<()> {
    let screen = "living/crop:200,60,440,230/crop:16,12,224,150";
    let mut fixtures = MockBackend::builder()
        .ground("living", "the television", [200.0, 60.0, 440.0, 230.0])
        .ground("living/crop:200,60,440,230", "the screen", [16.0, 12.0, 224.0, 150.0]);
    for art in ["a", "the", "this", "that"] {
        fixtures = fixtures.vqa(screen, &format!("what is shown on {art} screen?"), "a soccer match");
    }
    let rec = Recognizer::new(Extractor::new(Gateway::new(fixtures.build())));
    let room = ImageBuffer::from_fn(640, 360, |x, y| [(x % 64) as f32 / 64.0, (y % 36) as f32 / 36.0, 0.5])?
        .with_id("living");

    let chain = RefinementChain::new(vec![
        RecognitionTask::location("the television"),
        RecognitionTask::location("the screen"),
        RecognitionTask::mvqa_choice("what is shown on {art} screen?", &["a soccer match", "a news program"]),
    ])?;
    let r = rec.stepwise_refine(&room, &chain)?;
    for b in &r.box_chain {
        println!("{:<15} {:?}", b.source_phrase, b.coords());
    }
    println!("answer: {:?}", r.steps.last().and_then(|s| s.outcome.label()));
    Ok(())
}
