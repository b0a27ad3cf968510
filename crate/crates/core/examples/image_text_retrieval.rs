//! Image-text retrieval: score phrases against the image and softmax them.

use vlx::backend::{Gateway, MockBackend};
use vlx::extract::{ChoiceSet, Extractor};
use vlx::image::ImageBuffer;

fn main() -> vlx::Result<()> {
    let gateway = Gateway::new(
        MockBackend::builder()
            .itr("kitchen", "an open refrigerator", 24.1)
            .itr("kitchen", "a closed refrigerator", 22.7)
            .itr("kitchen", "an oven", 15.0)
            .build(),
    );
    let image = ImageBuffer::filled(32, 32, [0.9, 0.9, 0.95])?.with_id("kitchen");
    let choices = ChoiceSet::new(["an open refrigerator", "a closed refrigerator", "an oven"])?;
    for t in [0.5, 1.0, 4.0] {
        let d = Extractor::new(gateway.clone()).with_temperature(t).run_itr(&image, &choices)?;
        let probs: Vec<String> = d.probabilities.iter().map(|p| format!("{p:.3}")).collect();
        println!("T={t}: {} -> {:?}", probs.join(" "), d.selected_phrase);
    }
    Ok(())
}
