//! `qdvapor`: forward models, simulations and fits for quantum-dot resonance
//! fluorescence filtered by a rubidium vapor cell.
//!
//! Every subcommand writes plot-ready CSV, a `<stem>.plot.json` plot spec
//! and a `<stem>.run.json` run record next to its main output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod fitcmd;
mod forward;
mod output;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "qdvapor", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// The twelve D2 hyperfine lines with their relative strengths
    Catalog(forward::CatalogArgs),
    /// Laser transmission spectrum of the vapor cell
    Vapor(forward::VaporArgs),
    /// Resonance fluorescence: emission spectrum, excitation line or power broadening
    Rf(forward::RfArgs),
    /// Model g² histogram, optionally with blinking and an instrument response
    G2(forward::G2Args),
    /// Cell transmission seen by a laser, a Lorentzian source or resonance fluorescence
    Transmit(forward::TransmitArgs),
    /// IRF-convolved population decay after pulsed excitation
    Decay(forward::DecayArgs),
    /// Monte-Carlo click streams and synthetic datasets
    #[command(subcommand)]
    Simulate(simulate::SimulateCommand),
    /// χ² fit from a manifest, or the power-broadening regression
    Fit(fitcmd::FitArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Catalog(a) => forward::catalog(a),
        Command::Vapor(a) => forward::vapor(a),
        Command::Rf(a) => forward::rf(a),
        Command::G2(a) => forward::g2(a),
        Command::Transmit(a) => forward::transmit(a),
        Command::Decay(a) => forward::decay(a),
        Command::Simulate(c) => simulate::simulate(c),
        Command::Fit(a) => fitcmd::fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
