//! Shipped preset configurations, embedded into the binary.

use std::path::Path;
use std::process::ExitCode;

pub const PRESETS: [(&str, &str, &str); 4] = [
    (
        "fig1-low",
        "chaotic rotor echo with classical comparison, N = 2^11",
        include_str!("../presets/fig1-low.toml"),
    ),
    (
        "fig1-mid",
        "chaotic rotor echo with classical comparison, N = 2^13",
        include_str!("../presets/fig1-mid.toml"),
    ),
    (
        "fig1-high",
        "chaotic rotor echo with classical comparison, N = 2^15",
        include_str!("../presets/fig1-high.toml"),
    ),
    (
        "null",
        "zero perturbation, all fidelities stay at 1",
        include_str!("../presets/null.toml"),
    ),
];

/// List the presets; with `--out`, also write them as <name>.toml files.
pub fn list(out: Option<&Path>) -> ExitCode {
    if let Some(dir) = out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("configuration error: cannot create {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }
    for (name, description, body) in PRESETS {
        println!("{name:12} {description}");
        if let Some(dir) = out {
            let path = dir.join(format!("{name}.toml"));
            if let Err(e) = std::fs::write(&path, body) {
                eprintln!("configuration error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
    }
    ExitCode::SUCCESS
}
