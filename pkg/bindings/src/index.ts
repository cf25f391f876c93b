/**
 * TypeScript bindings for the slotforge constrained-generation engine.
 *
 * The engine runs as a child process speaking a versioned, line-delimited
 * JSON protocol over stdio (`python3 -m slotforge.ffi`). Compiled mask
 * tables stay on the engine side behind opaque integer handles; arrays
 * cross the boundary flat with explicit dimensions. Engine errors surface
 * as thrown `EngineError`s; a released handle always throws and never
 * corrupts other handles.
 */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { createInterface, type Interface } from "node:readline";

export const PROTOCOL_VERSION = 1;

export interface EngineOptions {
  /** Python interpreter; defaults to $SLOTFORGE_PYTHON or "python3". */
  pythonBin?: string;
  /** Extra PYTHONPATH entry so `slotforge` resolves without installation. */
  pythonPath?: string;
}

export interface FsmState {
  slotIndex: number;
  tokensInSlot: number;
  atBoundary: boolean;
  finished?: boolean;
}

export interface CompiledFormat {
  handle: number;
  slotCount: number;
  vocabSize: number;
}

export interface LossWeights {
  wCe?: number;
  wSt?: number;
  wSl?: number;
  wMiss?: number;
}

export interface LossResult {
  value: number;
  /** Flat row-major gradient, length t * v. */
  grad: number[];
  ce?: number;
  st?: number;
}

export class EngineError extends Error {}

interface PendingReply {
  resolve: (reply: Record<string, unknown>) => void;
  reject: (err: Error) => void;
}

/** One engine process plus a tiny request/reply multiplexer. */
export class SlotforgeEngine {
  private proc: ChildProcessWithoutNullStreams;
  private lines: Interface;
  private nextId = 1;
  private pending = new Map<number, PendingReply>();
  private closed = false;

  constructor(options: EngineOptions = {}) {
    const bin = options.pythonBin ?? process.env.SLOTFORGE_PYTHON ?? "python3";
    const env = { ...process.env };
    if (options.pythonPath) {
      env.PYTHONPATH = options.pythonPath + (env.PYTHONPATH ? `:${env.PYTHONPATH}` : "");
    }
    this.proc = spawn(bin, ["-m", "slotforge.ffi"], { env, stdio: "pipe" });
    this.lines = createInterface({ input: this.proc.stdout });
    this.lines.on("line", (line) => this.onLine(line));
    this.proc.on("exit", () => this.failAll(new EngineError("engine process exited")));
    this.proc.on("error", (err) => this.failAll(new EngineError(`engine spawn failed: ${err.message}`)));
  }

  private onLine(line: string): void {
    let reply: Record<string, unknown>;
    try {
      reply = JSON.parse(line);
    } catch {
      return; // stray non-protocol output
    }
    const id = reply.id as number;
    const waiter = this.pending.get(id);
    if (!waiter) return;
    this.pending.delete(id);
    waiter.resolve(reply);
  }

  private failAll(err: Error): void {
    if (this.closed) return;
    for (const waiter of this.pending.values()) waiter.reject(err);
    this.pending.clear();
  }

  private request(op: string, params: Record<string, unknown>): Promise<Record<string, unknown>> {
    if (this.closed) return Promise.reject(new EngineError("engine already closed"));
    const id = this.nextId++;
    const payload = JSON.stringify({ id, op, ...params });
    return new Promise((resolve, reject) => {
      this.pending.set(id, {
        resolve: (reply) => {
          if (reply.ok) resolve(reply);
          else reject(new EngineError(String(reply.error ?? "unknown engine error")));
        },
        reject,
      });
      this.proc.stdin.write(payload + "\n");
    });
  }

  async info(): Promise<{ protocol: number; engine: string }> {
    const reply = await this.request("info", {});
    return { protocol: reply.protocol as number, engine: reply.engine as string };
  }

  /**
   * Compile a format string (plus optional tagset binding) against a full
   * id-to-token vocabulary and a source-sentence id list.
   */
  async compile(
    format: string,
    tags: string[] | null,
    vocab: string[],
    sourceIds: number[],
  ): Promise<CompiledFormat> {
    const reply = await this.request("compile", {
      format,
      tags,
      vocab,
      source_ids: sourceIds,
    });
    return {
      handle: reply.handle as number,
      slotCount: reply.slot_count as number,
      vocabSize: reply.vocab_size as number,
    };
  }

  /** Legal-token byte vector (0/1 per token id) for an FSM state. */
  async legalTokens(handle: number, state: FsmState): Promise<number[]> {
    const reply = await this.request("legal", { handle, ...wireState(state) });
    return reply.mask as number[];
  }

  /** Advance the FSM by one legal token; throws on an illegal one. */
  async advance(handle: number, state: FsmState, token: number): Promise<FsmState> {
    const reply = await this.request("advance", { handle, ...wireState(state), token });
    return {
      slotIndex: reply.slot_index as number,
      tokensInSlot: reply.tokens_in_slot as number,
      atBoundary: reply.at_boundary as boolean,
      finished: reply.finished as boolean,
    };
  }

  /**
   * Loss value and flat gradient for a (t x v) logits matrix.
   *
   * With a handle the combined objective (cross-entropy, structure and
   * slot losses) is computed against the handle's mask table; without one,
   * pass explicit separator positions and keep the slot-loss weight at 0.
   */
  async losses(args: {
    logits: number[];
    t: number;
    v: number;
    target: number[];
    sepPositions?: number[];
    weights?: LossWeights;
    handle?: number;
  }): Promise<LossResult> {
    const weights: Record<string, number> = {};
    if (args.weights?.wCe !== undefined) weights.w_ce = args.weights.wCe;
    if (args.weights?.wSt !== undefined) weights.w_st = args.weights.wSt;
    if (args.weights?.wSl !== undefined) weights.w_sl = args.weights.wSl;
    if (args.weights?.wMiss !== undefined) weights.w_miss = args.weights.wMiss;
    const reply = await this.request("losses", {
      logits: args.logits,
      t: args.t,
      v: args.v,
      target: args.target,
      sep_positions: args.sepPositions,
      weights,
      handle: args.handle ?? null,
    });
    return {
      value: reply.value as number,
      grad: reply.grad as number[],
      ce: reply.ce as number | undefined,
      st: reply.st as number | undefined,
    };
  }

  /** Release a compiled handle; further use of it throws. */
  async release(handle: number): Promise<void> {
    await this.request("release", { handle });
  }

  /** Terminate the engine process. */
  close(): void {
    if (this.closed) return;
    this.closed = true;
    this.failAll(new EngineError("engine closed"));
    this.proc.stdin.end();
    this.proc.kill();
  }
}

function wireState(state: FsmState): Record<string, unknown> {
  return {
    slot_index: state.slotIndex,
    tokens_in_slot: state.tokensInSlot,
    at_boundary: state.atBoundary,
    finished: state.finished ?? false,
  };
}
