//! The `airpad` command-line tool and the live session server.

pub mod cli;
pub mod server;
