//! Model fixtures shared by the benchmarks.

use twave_core::coefficients::parse_model;
use twave_core::Model;

pub const FISHER: &str = "p = 2\nf = \"0\"\ng = \"1\"\nh = \"x*(1-x)\"\nd = \"1\"\n";

pub const DEGENERATE: &str = "p = 2\nf = \"0\"\ng = \"1\"\nh = \"x*(1-x)\"\nd = \"x\"\n";

pub const CONVECTION: &str = r#"
p = 2
f = [{ interval = [0.0, 0.5], expr = "0" }, { interval = [0.5, 1.0], expr = "1" }]
g = "1"
h = "x*(1-x)"
d = "1"
"#;

pub fn load(src: &str) -> Model {
    parse_model(src).expect("fixture parses")
}
