//! Is the door open? Binary VQA over the 5 x 4 query grid.
//!
//! One noise variant answers inconsistently, so the tally is not unanimous.

use vlx::backend::{Gateway, MockBackend};
use vlx::extract::Extractor;
use vlx::image::ImageBuffer;
use vlx::variation::QuestionTemplate;

fn main() -> vlx::Result<()> {
    let mut fixtures = MockBackend::builder();
    for art in ["a", "the", "this", "that"] {
        let q = format!("is {art} door open?");
        fixtures = fixtures.vqa("hallway", &q, "Yes.").vqa_variant("hallway", 3, &q, "it is hard to tell");
    }
    let gateway = Gateway::new(fixtures.build());

    let image = ImageBuffer::from_fn(160, 120, |x, _| {
        if (60..100).contains(&x) {
            [0.1, 0.1, 0.1]
        } else {
            [0.8, 0.75, 0.6]
        }
    })?
    .with_id("hallway");

    let result = Extractor::new(gateway.clone()).run_bvqa(&image, &QuestionTemplate::new("is {art} door open?")?)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    for t in result.trials.iter().filter(|t| t.variant == 3) {
        println!("variant {}: {:?} -> {:?}", t.variant, t.question, t.answer);
    }
    println!("backend calls: {}", gateway.total_calls());
    Ok(())
}
