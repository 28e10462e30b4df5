use std::collections::BTreeSet;

use oufreq::cli::RunConfig;
use serde_json::Value;

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn schema_matches_configuration_keys() {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/config.schema.json")).unwrap();
    let config = serde_json::to_value(RunConfig::default()).unwrap();
    let props = &schema["properties"];
    assert_eq!(keys(props), keys(&config));
    for section in ["model", "experiment"] {
        assert_eq!(keys(&props[section]["properties"]), keys(&config[section]), "{section}");
    }
    assert!(props["signal"]["oneOf"]
        .as_array()
        .unwrap()
        .iter()
        .any(|alt| alt["properties"]["kind"]["const"] == config["signal"]["kind"]));
}

#[test]
fn schema_defaults_match() {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/config.schema.json")).unwrap();
    let config = serde_json::to_value(RunConfig::default()).unwrap();
    for section in ["model", "experiment"] {
        for (k, p) in schema["properties"][section]["properties"].as_object().unwrap() {
            if let Some(d) = p.get("default") {
                let actual = &config[section][k];
                let same = match (d.as_f64(), actual.as_f64()) {
                    (Some(x), Some(y)) => x == y,
                    _ => d == actual,
                };
                assert!(same, "{section}.{k}: schema {d} vs {actual}");
            }
        }
    }
}
