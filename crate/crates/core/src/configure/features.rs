use crate::paramspace::{Configuration, Domain, ParameterSpace, SpaceId};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    /// Value slot of parameter `i`.
    Value(usize),
    /// Activity indicator of conditional parameter `i`.
    Active(usize),
}

/// Fixed-length numeric encoding of the configurations of one space.
///
/// Categorical values map to their index, numeric values to `[0, 1]` over
/// the domain (log-space when log-scaled). Conditional parameters get an
/// extra indicator slot; when inactive their value slot holds the default's
/// encoding and the indicator is 0.
#[derive(Debug, Clone)]
pub struct FeatureEncoder {
    space: ParameterSpace,
    slots: Vec<Slot>,
}

impl FeatureEncoder {
    pub fn new(space: &ParameterSpace) -> Self {
        let mut slots = Vec::new();
        for (i, p) in space.parameters().iter().enumerate() {
            slots.push(Slot::Value(i));
            if space.condition_for(&p.name).is_some() {
                slots.push(Slot::Active(i));
            }
        }
        FeatureEncoder {
            space: space.clone(),
            slots,
        }
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn space_id(&self) -> SpaceId {
        self.space.id()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn encode(&self, config: &Configuration) -> Vec<f64> {
        let params = self.space.parameters();
        self.slots
            .iter()
            .map(|slot| match *slot {
                Slot::Value(i) => {
                    let p = &params[i];
                    let v = config.get(&p.name).unwrap_or(&p.default);
                    encode_value(&p.domain, v)
                }
                Slot::Active(i) => {
                    if config.get(&params[i].name).is_some() {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }
}

fn encode_value(domain: &Domain, v: &crate::paramspace::Value) -> f64 {
    match domain {
        Domain::Categorical(_) => domain.category_index(v).unwrap_or(0) as f64,
        _ => domain.normalize(v).unwrap_or(0.0),
    }
}

/// Encode `config` for a model over `space`.
pub fn encode_features(space: &ParameterSpace, config: &Configuration) -> Vec<f64> {
    FeatureEncoder::new(space).encode(config)
}
