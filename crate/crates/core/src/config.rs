//! Cost model configuration.
//!
//! Every simulated action is priced from a single [`CostModel`]. The model can
//! be loaded from a TOML key-value file whose keys are exactly the field
//! names below; unknown keys are rejected so typos cannot silently fall back
//! to defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Cycle and clock parameters for the simulated system.
///
/// PIM-side costs are in PIM-core cycles; `launch_fixed_cycles` and bus
/// transfer costs are in host cycles (the host drives launches and the
/// shared memory bus).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostModel {
    /// Cycles for one on-chip scratchpad access.
    pub scratchpad_access_cycles: u64,
    /// Fixed cycles for any DRAM transfer, independent of size.
    pub dram_fixed_cycles: u64,
    /// Additional DRAM cycles per byte moved (result is rounded up).
    pub dram_per_byte_cycles: f64,
    /// Cycles for one ALU operation.
    pub alu_op_cycles: u64,
    /// PIM core clock frequency in Hz.
    pub pim_clock_hz: f64,
    /// Host CPU clock frequency in Hz.
    pub host_clock_hz: f64,
    /// Number of host threads available for host-side parallel work.
    pub host_threads: u32,
    /// Host-side bus width: bytes moved per host cycle on the shared bus.
    pub bus_bytes_per_cycle: u64,
    /// Fixed host cycles to launch a PIM kernel batch.
    pub launch_fixed_cycles: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            scratchpad_access_cycles: 1,
            dram_fixed_cycles: 100,
            dram_per_byte_cycles: 0.5,
            alu_op_cycles: 1,
            pim_clock_hz: 350e6,
            host_clock_hz: 3e9,
            host_threads: 8,
            bus_bytes_per_cycle: 8,
            launch_fixed_cycles: 10_000,
        }
    }
}

impl CostModel {
    /// Parses a cost model from TOML text. Missing keys take defaults;
    /// unknown keys and non-positive values are errors.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let model: CostModel =
            toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    /// Loads a cost model from a TOML file.
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks that every parameter is strictly positive.
    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<&str> = Vec::new();
        if self.scratchpad_access_cycles == 0 {
            bad.push("scratchpad_access_cycles");
        }
        if self.dram_fixed_cycles == 0 {
            bad.push("dram_fixed_cycles");
        }
        if !(self.dram_per_byte_cycles > 0.0) {
            bad.push("dram_per_byte_cycles");
        }
        if self.alu_op_cycles == 0 {
            bad.push("alu_op_cycles");
        }
        if !(self.pim_clock_hz > 0.0) {
            bad.push("pim_clock_hz");
        }
        if !(self.host_clock_hz > 0.0) {
            bad.push("host_clock_hz");
        }
        if self.host_threads == 0 {
            bad.push("host_threads");
        }
        if self.bus_bytes_per_cycle == 0 {
            bad.push("bus_bytes_per_cycle");
        }
        if self.launch_fixed_cycles == 0 {
            bad.push("launch_fixed_cycles");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SimError::Config(format!(
                "parameters must be strictly positive: {}",
                bad.join(", ")
            )))
        }
    }

    /// Cycles for a DRAM transfer of `bytes` (fixed latency plus per-byte
    /// cost, rounded up to a whole cycle).
    pub fn dram_transfer_cycles(&self, bytes: u64) -> u64 {
        self.dram_fixed_cycles + (bytes as f64 * self.dram_per_byte_cycles).ceil() as u64
    }

    /// Host cycles to move `bytes` over the shared host<->PIM bus.
    pub fn bus_transfer_cycles(&self, bytes: u64) -> u64 {
        self.dram_fixed_cycles + bytes.div_ceil(self.bus_bytes_per_cycle)
    }

    /// Host-to-PIM clock ratio (how many host cycles fit in one PIM cycle).
    pub fn clock_ratio(&self) -> f64 {
        self.host_clock_hz / self.pim_clock_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_positive_and_expected() {
        let m = CostModel::default();
        m.validate().unwrap();
        assert_eq!(m.scratchpad_access_cycles, 1);
        assert_eq!(m.dram_fixed_cycles, 100);
        assert_eq!(m.dram_per_byte_cycles, 0.5);
        assert_eq!(m.alu_op_cycles, 1);
        assert_eq!(m.pim_clock_hz, 350e6);
        assert_eq!(m.host_clock_hz, 3e9);
        assert_eq!(m.host_threads, 8);
        assert_eq!(m.bus_bytes_per_cycle, 8);
        assert_eq!(m.launch_fixed_cycles, 10_000);
    }

    #[test]
    fn dram_transfer_arithmetic_frozen_values() {
        let m = CostModel::default();
        // 100 fixed + ceil(bytes * 0.5)
        assert_eq!(m.dram_transfer_cycles(64), 132);
        assert_eq!(m.dram_transfer_cycles(1), 101);
        assert_eq!(m.dram_transfer_cycles(4096), 2148);
        assert_eq!(m.dram_transfer_cycles(4), 102);
        assert_eq!(m.dram_transfer_cycles(3), 102); // ceil(1.5) = 2
    }

    #[test]
    fn toml_roundtrip_and_partial_override() {
        let m = CostModel::from_toml_str("dram_fixed_cycles = 50\n").unwrap();
        assert_eq!(m.dram_fixed_cycles, 50);
        assert_eq!(m.scratchpad_access_cycles, 1); // default retained
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = CostModel::from_toml_str("dram_fixd_cycles = 50\n").unwrap_err();
        assert!(matches!(err, SimError::Config(_)));
    }

    #[test]
    fn non_positive_values_rejected() {
        assert!(CostModel::from_toml_str("alu_op_cycles = 0\n").is_err());
        assert!(CostModel::from_toml_str("pim_clock_hz = -1.0\n").is_err());
    }
}
