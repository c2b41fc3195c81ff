//! Full-scale network descriptors for the nine competition networks.
//!
//! The six unit counts of each [`NetworkSpec::standard`] chain put the
//! trainable-weight total within 2% of the reference figure. Output layer
//! sizes follow the field alphabets.

use super::NetworkSpec;
use crate::fields::FieldType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShippedNetwork {
    pub name: &'static str,
    pub field: FieldType,
    /// Reference total of trainable weights.
    pub reference_weights: usize,
    /// Reference number of cells.
    pub reference_cells: usize,
    /// Reference number of output neurons.
    pub output_neurons: usize,
    /// Widths of the six trainable layers before the output layer.
    pub units: [usize; 6],
}

impl ShippedNetwork {
    pub fn spec(&self) -> NetworkSpec {
        NetworkSpec::standard(self.name, self.field, self.units, 0x5EED_0000 + *self.name.as_bytes().last().unwrap_or(&0) as u64)
    }
}

pub const SHIPPED_NETWORKS: [ShippedNetwork; 9] = [
    ShippedNetwork { name: "N1", field: FieldType::Name, reference_weights: 958_387, reference_cells: 1900, output_neurons: 56, units: [16, 72, 240, 240, 240, 50] },
    ShippedNetwork { name: "N2", field: FieldType::Name, reference_weights: 363_477, reference_cells: 1166, output_neurons: 56, units: [16, 28, 176, 176, 176, 30] },
    ShippedNetwork { name: "N3", field: FieldType::Name, reference_weights: 363_477, reference_cells: 1166, output_neurons: 56, units: [16, 28, 176, 176, 176, 30] },
    ShippedNetwork { name: "R1", field: FieldType::Relation, reference_weights: 1_006_387, reference_cells: 1900, output_neurons: 56, units: [16, 32, 224, 224, 224, 94] },
    ShippedNetwork { name: "R2", field: FieldType::Relation, reference_weights: 1_006_387, reference_cells: 1900, output_neurons: 56, units: [16, 32, 224, 224, 224, 94] },
    ShippedNetwork { name: "A", field: FieldType::Age, reference_weights: 933_556, reference_cells: 1869, output_neurons: 25, units: [16, 56, 256, 256, 256, 54] },
    ShippedNetwork { name: "M", field: FieldType::Marital, reference_weights: 967_138, reference_cells: 1851, output_neurons: 7, units: [16, 52, 240, 240, 240, 70] },
    ShippedNetwork { name: "B1", field: FieldType::Birthplace, reference_weights: 1_005_586, reference_cells: 1899, output_neurons: 55, units: [16, 16, 256, 256, 256, 88] },
    ShippedNetwork { name: "B2", field: FieldType::Birthplace, reference_weights: 655_747, reference_cells: 1532, output_neurons: 55, units: [16, 64, 240, 240, 240, 8] },
];

pub fn find(name: &str) -> Option<&'static ShippedNetwork> {
    SHIPPED_NETWORKS.iter().find(|n| n.name == name)
}
