pub mod basestation;
pub mod bus;
pub mod channel;
pub mod codec;
pub mod harness;
pub mod time;
pub mod twin;
