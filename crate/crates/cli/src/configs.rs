//! Configurations shipped with the binary; `verify` runs on these unless
//! `--config` is given.

pub const SHIPPED: [(&str, &str); 7] = [
    ("unit_r1", include_str!("../configs/unit_r1.toml")),
    ("unit_3p4i", include_str!("../configs/unit_3p4i.toml")),
    ("perturbed_r1", include_str!("../configs/perturbed_r1.toml")),
    ("perturbed_3p4i", include_str!("../configs/perturbed_3p4i.toml")),
    ("cusp_tail", include_str!("../configs/cusp_tail.toml")),
    ("collar_r1", include_str!("../configs/collar_r1.toml")),
    ("horospherical", include_str!("../configs/horospherical.toml")),
];
