//! Scenario files compiled into the binary.

pub const SCENARIOS: &[(&str, &str)] = &[
    (
        "gaussian-smoke",
        include_str!("../scenarios/gaussian-smoke.toml"),
    ),
    ("anomalous", include_str!("../scenarios/anomalous.toml")),
    (
        "generic-stable",
        include_str!("../scenarios/generic-stable.toml"),
    ),
    ("cauchy", include_str!("../scenarios/cauchy.toml")),
    (
        "forced-failure",
        include_str!("../scenarios/forced-failure.toml"),
    ),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}
