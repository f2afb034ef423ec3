//! System and trajectory file formats.

mod system_file;
mod trajectory_csv;

pub use system_file::{
    read_system_file, write_system_file, HamiltonianSpec, ResistiveSpec, SimulationDefaults, SystemFileV1,
    SystemParts, SYSTEM_FILE_VERSION,
};
pub use trajectory_csv::{read_trajectory, read_trajectory_file, write_trajectory, write_trajectory_file};
