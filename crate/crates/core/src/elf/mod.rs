//! Native CGX producer for 32-bit little-endian ARM (A32) executables.

mod consts;
mod decode;
mod emit;
mod parse;

pub use consts::recover_consts;
pub use decode::{decode_calls, decode_word, CallKind, CallScan, DecodedCall, ElfFunction};
pub use emit::{emit_cgx, ingest_elf, ElfIngest};
pub use parse::{parse_elf32, ElfError, ElfSection, ElfSymbol, ElfView, PltReloc, SymbolKind};
