//! Visual grounding: find the kettle and the handle to grasp.

use vlx::backend::{Gateway, MockBackend};
use vlx::extract::{crop, Extractor};
use vlx::image::ImageBuffer;
use vlx::recognition::Recognizer;

fn main() -> vlx::Result<()> {
    let gateway = Gateway::new(
        MockBackend::builder()
            .ground("counter", "the kettle", [88.4, 40.0, 171.6, 132.2])
            .ground("counter", "handle of the kettle", [140.0, 52.5, 170.2, 101.0])
            .ground_nothing("counter", "the toaster")
            .build(),
    );
    let image = ImageBuffer::from_fn(240, 160, |x, y| [x as f32 / 240.0, y as f32 / 160.0, 0.4])?.with_id("counter");
    let rec = Recognizer::new(Extractor::new(gateway));

    let kettle = rec.locate_object(&image, "the kettle")?;
    println!("kettle: {:?}", kettle.coords());
    let handle = rec.recognize_affordance(&image, "kettle", "handle")?;
    let patch = crop(&image, &handle)?;
    println!("handle: {:?} ({}x{} crop)", handle.coords(), patch.width(), patch.height());

    match rec.locate_object(&image, "the toaster") {
        Err(e) => println!("toaster: {} ({})", e, e.code()),
        Ok(b) => println!("toaster: {:?}", b.coords()),
    }
    Ok(())
}
