//! Built-in configurations, selectable by name on the command line.

pub const NAMES: &[&str] = &[
    "heat",
    "burgers",
    "viable-ball",
    "offcenter-ball",
    "radial",
    "example-4-4",
    "example-4-4-infeasible",
];

const HEAT: &str = r#"
seed = 1

[triple]
dim = 8

[operator]
kind = "heat"

[multifunction]
kind = "centered_ball"
radius = 1.0

[constraint]
kind = "ball"
radius = 1.0

[start]
x0 = [0.6, -0.5, 0.4, 0.3, 0.0, 0.0, 0.0, 0.0]

[checks]
samples = 1000
"#;

const BURGERS: &str = r#"
seed = 2

[triple]
dim = 16

[operator]
kind = "burgers"
nu = 0.1

[multifunction]
kind = "centered_ball"
radius = 1.0

[start]
x0 = [1.0, 0.5, -0.25, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]

[checks]
samples = 10000
fit_samples = 2000
scales = [1.0, 10.0, 30.0]
"#;

const VIABLE_BALL: &str = r#"
seed = 3

[triple]
dim = 4

[operator]
kind = "heat"

[multifunction]
kind = "centered_ball"
radius = 1.0

[constraint]
kind = "ball"
radius = 1.0

[start]
x0 = [0.6, -0.5, 0.4, 0.3]

[viability]
n_max = 8
probe_nodes = 8
expect = "viable"
"#;

const OFFCENTER_BALL: &str = r#"
seed = 4

[triple]
lambda = [1.0, 4.0]

[operator]
kind = "heat"

[multifunction]
kind = "centered_ball"
radius = 1.0

[constraint]
kind = "ball"
center = [5.0, 0.0]
radius = 0.5

[start]
x0 = [5.0, 0.0]

[grid]
steps = 1024

[viability]
n_max = 10
expect = "not_viable"
"#;

const RADIAL: &str = r#"
seed = 5

[triple]
lambda = [1.0]
horizon = 0.6931471805599453

[operator]
kind = "heat"

[multifunction]
kind = "centered_ball"
radius = 1.0

[cost]
kind = "norm_target"

[start]
x0 = [4.0]

[grid]
steps = 4096

[hjb]
samples = 4
dpp_trajectories = 50
epi_points = 20
sub_trajectories = 20
"#;

const EXAMPLE: &str = r#"
seed = 6

[triple]
dim = 4

[operator]
kind = "heat"

[multifunction]
kind = "centered_ball"
radius = 1.0

[cost]
kind = "indicator_tube"
radius = 2.0

[grid]
steps = 256

[viability]
n_max = 4
"#;

/// TOML text of a preset.
pub fn preset(name: &str) -> Option<String> {
    let text = match name {
        "heat" => HEAT.to_string(),
        "burgers" => BURGERS.to_string(),
        "viable-ball" => VIABLE_BALL.to_string(),
        "offcenter-ball" => OFFCENTER_BALL.to_string(),
        "radial" => RADIAL.to_string(),
        "example-4-4" => format!("{EXAMPLE}\n[start]\nx0 = [1.0, 0.5, -0.5, 0.25]\nt0 = 0.25\n"),
        "example-4-4-infeasible" => {
            format!("{EXAMPLE}\n[start]\nx0 = [1.0, 0.5, -0.5, 0.25]\nt0 = 0.25\nexcursion = [2.5, 0.0, 0.0, 0.0]\n")
        }
        _ => return None,
    };
    Some(text)
}
