/**
 * Timeline state: a pure reducer over the step documents the API returns.
 * The DOM layer never invents state; every transition here is driven by a
 * server response, so a re-fetch of /steps must always agree with the local
 * state (the contract tests assert exactly that against recorded responses).
 */

import type { Step, StepListing } from "./types";

export interface TimelineState {
  steps: Step[];
  currentId: number;
  /** true while a mutation request is in flight; the UI allows only one */
  pending: boolean;
}

export function emptyTimeline(): TimelineState {
  return { steps: [], currentId: 0, pending: false };
}

/** Replace local state with a full /steps listing. */
export function fromListing(listing: StepListing): TimelineState {
  return {
    steps: [...listing.steps].sort((a, b) => a.step_id - b.step_id),
    currentId: listing.current_id,
    pending: false,
  };
}

/** A prune or edit succeeded; the returned step is the new current step. */
export function stepAdded(state: TimelineState, step: Step): TimelineState {
  const steps = state.steps.filter((s) => s.step_id !== step.step_id);
  steps.push(step);
  steps.sort((a, b) => a.step_id - b.step_id);
  return { steps, currentId: step.step_id, pending: false };
}

/** A revert succeeded with the server-confirmed current id. */
export function reverted(state: TimelineState, currentId: number): TimelineState {
  return { ...state, currentId, pending: false };
}

/** A delete succeeded; the server reports removed ids and the new current. */
export function stepsRemoved(
  state: TimelineState,
  removed: number[],
  currentId: number,
): TimelineState {
  const gone = new Set(removed);
  return {
    steps: state.steps.filter((s) => !gone.has(s.step_id)),
    currentId,
    pending: false,
  };
}

export function mutationStarted(state: TimelineState): TimelineState {
  return { ...state, pending: true };
}

export function mutationFailed(state: TimelineState): TimelineState {
  return { ...state, pending: false };
}

export function currentStep(state: TimelineState): Step | undefined {
  return state.steps.find((s) => s.step_id === state.currentId);
}

/** Children of a step, for drawing the branch structure. */
export function childrenOf(state: TimelineState, stepId: number): Step[] {
  return state.steps.filter((s) => s.parent_id === stepId);
}
