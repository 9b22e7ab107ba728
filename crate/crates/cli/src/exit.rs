//! Exit codes: 2 bad arguments, 3 I/O, 4 data validation, 1 anything else.

use std::fmt;

use tseg_core::datapipe::DataError;
use tseg_core::eval::EvalError;
use tseg_core::model::ModelError;
use tseg_core::tiled::TiledError;
use tseg_core::trainer::TrainError;

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const USAGE: u8 = 2;
pub const IO: u8 = 3;
pub const DATA: u8 = 4;

fn data(e: &DataError) -> u8 {
    match e {
        DataError::Io { .. } => IO,
        _ => DATA,
    }
}

fn model(e: &ModelError) -> u8 {
    match e {
        ModelError::Io(_) => IO,
        _ => DATA,
    }
}

fn eval(e: &EvalError) -> u8 {
    match e {
        EvalError::Io { .. } => IO,
        _ => DATA,
    }
}

fn train(e: &TrainError) -> u8 {
    match e {
        TrainError::Config(_) => USAGE,
        TrainError::Data(d) => data(d),
        TrainError::Model(m) => model(m),
        TrainError::Eval(v) => eval(v),
        _ => DATA,
    }
}

fn tiled(e: &TiledError) -> u8 {
    match e {
        TiledError::BudgetTooSmall { .. } | TiledError::HaloTooSmall { .. } => USAGE,
        TiledError::OutOfMemory { .. } => 1,
        TiledError::Data(d) => data(d),
        TiledError::Model(m) => model(m),
        TiledError::Eval(v) => eval(v),
        _ => DATA,
    }
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return USAGE;
        }
        if let Some(e) = cause.downcast_ref::<DataError>() {
            return data(e);
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return model(e);
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            return eval(e);
        }
        if let Some(e) = cause.downcast_ref::<TrainError>() {
            return train(e);
        }
        if let Some(e) = cause.downcast_ref::<TiledError>() {
            return tiled(e);
        }
        if cause.is::<serde_json::Error>() {
            return DATA;
        }
        if cause.is::<std::io::Error>() {
            return IO;
        }
    }
    1
}
