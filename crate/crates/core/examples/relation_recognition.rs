//! Spatial relation between two objects, matched longest phrase first.

use vlx::backend::{Gateway, MockBackend};
use vlx::extract::Extractor;
use vlx::image::ImageBuffer;
use vlx::recognition::Recognizer;

fn main() -> vlx::Result<()> {
    let answers = [
        ("a", "The mug is on top of the book."),
        ("the", "on top of the book"),
        ("this", "it is on the book"),
        ("that", "The mug sits on top of it."),
    ];
    let mut fixtures = MockBackend::builder();
    for (art, answer) in answers {
        let q = format!("what is the relative relationship between {art} mug and the book?");
        fixtures = fixtures.vqa("table", &q, answer);
    }
    let rec = Recognizer::new(Extractor::new(Gateway::new(fixtures.build())));
    let image = ImageBuffer::filled(48, 48, [0.6, 0.5, 0.4])?.with_id("table");
    let r = rec.recognize_relation(&image, "mug", "book")?;
    println!("relation: {:?}", r.relation);
    println!("counts: {:?}, unmatched {}", r.counts, r.unmatched);
    Ok(())
}
