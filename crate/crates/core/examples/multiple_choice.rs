//! Multiple-choice VQA: what color is the mug?
//!
//! Answers naming two choices count as invalid.

use vlx::backend::{Gateway, MockBackend};
use vlx::extract::{ChoiceSet, Extractor};
use vlx::image::ImageBuffer;
use vlx::variation::QuestionTemplate;

fn main() -> vlx::Result<()> {
    let answers = [("a", "a blue mug"), ("the", "Blue."), ("this", "blue or green"), ("that", "it looks blue")];
    let mut fixtures = MockBackend::builder();
    for (art, answer) in answers {
        fixtures = fixtures.vqa("desk", &format!("what color is {art} mug?"), answer);
    }
    let ex = Extractor::new(Gateway::new(fixtures.build()));
    let image = ImageBuffer::filled(64, 64, [0.2, 0.3, 0.8])?.with_id("desk");
    let template = QuestionTemplate::new("what color is {art} mug?")?;

    let choices = ChoiceSet::new(["red", "green", "blue"])?;
    let r = ex.run_mvqa(&image, &template, &choices)?;
    println!("{}", serde_json::to_string_pretty(&r)?);

    // Without a choice set the modal normalized answer is returned.
    let free = ex.run_mvqa_freeform(&image, &template)?;
    println!("free-form: {:?} ({} of {})", free.answer, free.support, free.total);
    Ok(())
}
