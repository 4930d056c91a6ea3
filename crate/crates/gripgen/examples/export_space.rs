//! Regenerates the shipped design-space document:
//!
//! ```sh
//! cargo run -p gripgen --example export_space > space/power_grasp_v1.json
//! ```

use gripgen::space::build_power_grasp_space;

fn main() {
    let doc = build_power_grasp_space().to_json();
    println!("{}", serde_json::to_string_pretty(&doc).expect("space serializes"));
}
