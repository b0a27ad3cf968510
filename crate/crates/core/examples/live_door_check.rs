//! Manual check against a real model server.
//!
//! Usage:
//!   VLX_BACKEND_ENDPOINT=http://localhost:8000 \
//!     cargo run --example live_door_check -- open_door.jpg closed_door.jpg
//!
//! Expect YES for the first photo and NO for the second.

use vlx::config::{BackendConfig, ToolkitConfig, ENDPOINT_ENV};
use vlx::extract::Decision;
use vlx::image::ImageBuffer;
use vlx::variation::QuestionTemplate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let endpoint = std::env::var(ENDPOINT_ENV).map_err(|_| format!("{ENDPOINT_ENV} is not set"))?;
    let paths: Vec<String> = std::env::args().skip(1).collect();
    let [open, closed] = paths.as_slice() else {
        return Err("usage: live_door_check OPEN_IMAGE CLOSED_IMAGE".into());
    };
    let config = ToolkitConfig::with_backend(BackendConfig::http(&endpoint));
    let gateway = config.gateway()?;
    gateway.ping()?;
    let ex = config.extractor(gateway);
    let template = QuestionTemplate::new("is {art} door open?")?;

    let mut ok = true;
    for (path, want) in [(open, Decision::Yes), (closed, Decision::No)] {
        let r = ex.run_bvqa(&ImageBuffer::open(path)?, &template)?;
        println!(
            "{path}: {:?} (yes {:.2}, no {:.2}, invalid {:.2}), expected {want:?}",
            r.decision, r.yes_ratio, r.no_ratio, r.invalid_ratio
        );
        ok &= r.decision == want;
    }
    if !ok {
        return Err("live check failed".into());
    }
    println!("live check passed");
    Ok(())
}
