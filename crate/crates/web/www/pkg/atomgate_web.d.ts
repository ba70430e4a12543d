/* tslint:disable */
/* eslint-disable */

/**
 * Reconstructed atom-photon state: fidelity, best fidelity over the
 * relative phase, that phase in units of π, then 16 real and 16 imaginary
 * parts of ρ in row-major order.
 */
export function bellDensity(overlap: number, prep: number, jitter_khz: number, offset_khz: number, analyzer_error: number): Float64Array;

/**
 * Ramsey fringe: contrast, peak transfer, then (detuning kHz, transfer,
 * fit) triples.
 */
export function ramseyCurve(separation_us: number, phase2: number, readout_fidelity: number): Float64Array;

/**
 * Reflection spectrum against laser detuning from the common resonance.
 * Five values per point: detuning (MHz), |r| and arg r coupled, then
 * uncoupled.
 */
export function reflectionCurve(g_mhz: number, kappa_mhz: number, gamma_mhz: number, span_mhz: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly bellDensity: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly ramseyCurve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly reflectionCurve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
