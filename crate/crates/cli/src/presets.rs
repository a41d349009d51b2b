//! Built-in experiment configs, embedded from `presets/*.json`.
//!
//! The same files are what `hcc presets --write DIR` exports, so editing a
//! copy and passing its path to `simulate` is the normal way to vary one.

pub const PRESETS: &[(&str, &str)] = &[
    ("fig3_vanilla_gan", include_str!("../presets/fig3_vanilla_gan.json")),
    ("fig4_wgan_regularized", include_str!("../presets/fig4_wgan_regularized.json")),
    ("fig4_wgan_cycle", include_str!("../presets/fig4_wgan_cycle.json")),
    ("fig4_sgda_regularized", include_str!("../presets/fig4_sgda_regularized.json")),
    ("fig4_sgda_cycle", include_str!("../presets/fig4_sgda_cycle.json")),
    ("rps_recurrence", include_str!("../presets/rps_recurrence.json")),
    ("rps_regularized", include_str!("../presets/rps_regularized.json")),
    ("hgd_mod_bilinear", include_str!("../presets/hgd_mod_bilinear.json")),
    ("rate_sweep", include_str!("../presets/rate_sweep.json")),
];

pub fn get(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn every_preset_validates_and_names_itself() {
        for (name, text) in PRESETS {
            let cfg = parse_config(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, *name);
            assert!(!cfg.targets.is_empty(), "{name} has no targets");
        }
        assert!(get("nope").is_none());
    }
}
