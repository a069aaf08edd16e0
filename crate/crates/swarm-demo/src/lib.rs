//! Browser playground over the core laboratory: three interactive views
//! computed in Rust and rendered by the static page in `www/`.
//!
//! Each operation takes a JSON parameter object and returns a JSON payload;
//! the wasm exports are thin wrappers so the logic stays testable on any
//! target.

mod views;

pub use views::{energy_rundown, flock_simulation, region_map};

use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub fn demo_flock(params: &str) -> String {
    wrap(views::flock_simulation(params))
}

#[wasm_bindgen]
pub fn demo_region(params: &str) -> String {
    wrap(views::region_map(params))
}

#[wasm_bindgen]
pub fn demo_energy(params: &str) -> String {
    wrap(views::energy_rundown(params))
}

fn wrap(result: Result<String, String>) -> String {
    match result {
        Ok(payload) => payload,
        Err(message) => {
            format!(
                "{{\"error\":{}}}",
                serde_json::to_string(&message).unwrap_or_else(|_| "\"error\"".into())
            )
        }
    }
}
