//! The simulation loop: perceive, select, generate, ground, execute, update.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::components::{generate, observed_terms, GenerateError, Generated, Proposal, Workspace};
use super::config::{ConfigError, PreparedRun};
use crate::agent::AgentMemory;
use crate::env::{apply_command, render_page, EnvState};
use crate::iface::{ground_action, parse_markup, perceive, BrowserCommand, DomTree, PerceivedState, PerceptionMode};
use crate::model::{
    apply_user_action_with, init_state_with, phases, CapabilityCall, Phase, SimulationState, TraceEvent, UserAction,
    TRACE_FORMAT_VERSION,
};
use crate::policy::{select_component, Policy, SelectContext};
use crate::simulators::{ids, stop_reason, ComponentKind};

/// Consecutive failed actions that end a run.
pub const MAX_CONSECUTIVE_FAILURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stopped,
    MaxSteps,
    Error,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub trace: Vec<TraceEvent>,
    pub final_state: SimulationState,
    pub final_env: EnvState,
    pub termination: Termination,
    pub reason: String,
    /// Wall-clock time of the run, not part of any reproducible output.
    pub wall_seconds: f64,
}

/// Render the current page for the run's site and perceive it through the
/// run's recipe.
pub fn observe(run: &PreparedRun, env: &EnvState) -> Result<(DomTree, PerceivedState, Vec<String>), String> {
    let page = render_page(env, &run.index, &run.config.site).map_err(|e| e.to_string())?;
    let dom = parse_markup(&page.markup);
    let p = perceive(&dom, &run.recipe, PerceptionMode::Lenient).map_err(|e| e.to_string())?;
    Ok((dom, p.state, p.warnings))
}

/// Ground every command against the page it acts on and apply it. All or
/// nothing: on failure the caller keeps the environment it had.
pub fn execute_commands(
    run: &PreparedRun,
    env: &EnvState,
    proposal: &Proposal,
) -> Result<(EnvState, Vec<BrowserCommand>, Vec<String>), String> {
    let mut work = env.clone();
    let mut commands = Vec::with_capacity(proposal.commands.len());
    let mut notes = Vec::new();
    for action in &proposal.commands {
        let (dom, _, _) = observe(run, &work)?;
        let cmd = ground_action(action, &dom, &run.recipe).map_err(|e| format!("{}: {e}", e.code()))?;
        let t = apply_command(&run.index, &work, &cmd, &run.config.site, run.config.page_size)
            .map_err(|e| format!("environment rejected {action}: {e}"))?;
        if let Some(n) = t.noop {
            notes.push(n);
        }
        work = t.env;
        commands.push(cmd);
    }
    Ok((work, commands, notes))
}

fn fallback_component(policy: &Policy, run: &PreparedRun) -> &'static str {
    let default = match policy {
        Policy::Rules(r) => Some(r.default.as_str()),
        Policy::Agentic(a) => Some(a.default.as_str()),
        Policy::Learned(_) => None,
    };
    match default.and_then(|d| run.registry.get(d).ok()) {
        Some(info) if info.kind == ComponentKind::RelevanceDecision => ids::RELEVANCE_DECISION,
        Some(info) if info.kind == ComponentKind::StoppingDecision => ids::STOPPING_DECISION,
        _ => ids::QUERY_GENERATION,
    }
}

struct StepOutcome {
    event: TraceEvent,
    state: SimulationState,
    env: EnvState,
}

struct Phases(Vec<Phase>, u64);

impl Phases {
    fn mark(&mut self, phase: &str) {
        self.0.push(Phase { phase: phase.to_string(), seq: self.1 });
        self.1 += 1;
    }
}

fn step_once(
    run: &PreparedRun,
    state: &SimulationState,
    env: &EnvState,
    memory: &mut AgentMemory,
    wall_order: u64,
) -> Result<StepOutcome, String> {
    let mut ph = Phases(Vec::new(), 0);
    let mut notes = Vec::new();
    let mut calls: Vec<CapabilityCall> = Vec::new();
    let mut failure = None;

    let (_, perceived, warnings) = observe(run, env)?;
    notes.extend(warnings);
    ph.mark(phases::PERCEIVE);

    let provider = run.provider.as_deref();
    let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
    rng.set_stream(state.step);
    let stop_rule = &run.config.components.stop_rule;
    let component = match stop_reason(state, stop_rule) {
        Some(reason) => {
            notes.push(format!("stop rule: {reason}"));
            ids::STOPPING_DECISION.to_string()
        }
        None => {
            let ctx = SelectContext {
                registry: &run.registry,
                provider,
                memory,
                prompts: &run.prompts,
                limits: &run.config.prompt_limits,
            };
            match select_component(&run.policy, state, &perceived, &ctx) {
                Ok(sel) => {
                    calls.extend(sel.call);
                    notes.extend(sel.warnings);
                    sel.component.component_id
                }
                Err(e) => return Err(e.to_string()),
            }
        }
    };
    ph.mark(phases::SELECT);

    let mut ws = Workspace { run, provider, memory };
    let Generated { proposal, calls: gen_calls, notes: gen_notes } =
        generate(&component, &mut ws, state, &perceived, env, &mut rng);
    calls.extend(gen_calls);
    notes.extend(gen_notes);
    let proposal = match proposal {
        Ok(p) => p,
        Err(GenerateError::Fatal(e)) => return Err(e.to_string()),
        Err(GenerateError::NotApplicable(why)) => {
            let mut chain = vec![fallback_component(&run.policy, run), ids::QUERY_GENERATION];
            chain.dedup();
            failure = Some(format!("{component}: {why}"));
            let mut found = None;
            for fb in chain {
                let g = generate(fb, &mut ws, state, &perceived, env, &mut rng);
                notes.extend(g.notes);
                if let Ok(p) = g.proposal {
                    notes.push(format!("fell back to {fb}"));
                    found = Some(p);
                    break;
                }
            }
            found.ok_or_else(|| format!("no component could act: {}", failure.clone().unwrap_or_default()))?
        }
    };
    ph.mark(phases::GENERATE);

    let executed = execute_commands(run, env, &proposal);
    ph.mark(phases::GROUND);
    ph.mark(phases::EXECUTE);
    let (next_env, commands, action) = match executed {
        Ok((next_env, commands, exec_notes)) => {
            notes.extend(exec_notes);
            (next_env, commands, UserAction::new(proposal.body.clone(), state.step))
        }
        Err(why) => {
            failure = Some(why);
            (env.clone(), Vec::new(), UserAction::new(proposal.body.clone(), state.step).failed())
        }
    };

    let terms = if action.failed { Vec::new() } else { observed_terms(&action.body, &perceived) };
    let cost = run.config.costs.cost(&action);
    let next_state =
        apply_user_action_with(state, action.clone(), cost, &terms).map_err(|e| e.to_string())?;
    let (_, after, _) = observe(run, &next_env)?;
    ph.mark(phases::UPDATE);

    let event = TraceEvent {
        format_version: TRACE_FORMAT_VERSION,
        step: state.step,
        wall_order,
        chosen_component: component,
        capability_calls: calls,
        user_action: Some(action),
        semantic_action: proposal.commands,
        browser_command: commands,
        observation_digest: after.digest(),
        state_snapshot: next_state.snapshot(),
        phases: ph.0,
        notes,
        failure,
    };
    Ok(StepOutcome { event, state: next_state, env: next_env })
}

/// Run a session to completion. `on_event` sees each event as it is
/// produced; `cancel` is polled between steps.
pub fn run_session_with(
    run: &PreparedRun,
    on_event: &mut dyn FnMut(&TraceEvent),
    cancel: Option<&AtomicBool>,
) -> Result<RunResult, ConfigError> {
    let started = Instant::now();
    let cfg = &run.config;
    let mut state = init_state_with(cfg.persona.clone(), cfg.need.to_need(), cfg.seed, cfg.cognitive)
        .map_err(|e| ConfigError::new("config", e.to_string()))?;
    let mut env = EnvState::start();
    let mut memory = AgentMemory::default();
    let mut trace = Vec::new();
    let (termination, reason) = loop {
        if cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
            break (Termination::Cancelled, "cancelled".to_string());
        }
        if state.step >= cfg.max_steps {
            break (Termination::MaxSteps, format!("reached max_steps = {}", cfg.max_steps));
        }
        match step_once(run, &state, &env, &mut memory, trace.len() as u64) {
            Err(why) => break (Termination::Error, why),
            Ok(out) => {
                on_event(&out.event);
                let stop_note = out.event.notes.iter().find(|n| n.starts_with("stop rule: ")).cloned();
                trace.push(out.event);
                state = out.state;
                env = out.env;
                if state.is_stopped() {
                    break (Termination::Stopped, stop_note.unwrap_or_else(|| "stopped".into()));
                }
                if state.consecutive_failures() >= MAX_CONSECUTIVE_FAILURES {
                    break (Termination::Error, format!("{MAX_CONSECUTIVE_FAILURES} consecutive failed actions"));
                }
            }
        }
    };
    Ok(RunResult {
        trace,
        final_state: state,
        final_env: env,
        termination,
        reason,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn run_session(run: &PreparedRun) -> Result<RunResult, ConfigError> {
    run_session_with(run, &mut |_| {}, None)
}
