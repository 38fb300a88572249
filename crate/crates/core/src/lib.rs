//! Random linear network coding over GF(2^8): field arithmetic, a
//! generation-based codec, the packet wire format, a model of a
//! network-coding switch pipeline, and a discrete-event simulator.

pub mod codec;
pub mod gf256;
pub mod simnet;
pub mod switch;
pub mod wire;

pub use codec::{
    CodecError, CodedPayload, CodingParams, CoefficientSource, DecoderState, Innovation,
    SourceSymbolMatrix,
};
pub use gf256::{gf_add, Field, GfContext, GfElement, GfError, MulAlgorithm};
pub use wire::{deserialize, make_ack, serialize, PacketType, RlncPacket, WireError};
