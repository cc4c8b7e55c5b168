/* tslint:disable */
/* eslint-disable */

export function eminCurve(beta2_sq: number, delta_sq: number, r: number, points: number, phase_grid: number): Float64Array;

export function phaseLandscape(beta1_sq: number, beta2_sq: number, delta_sq: number, r: number, n: number): Float64Array;

export function pointSolution(beta1_sq: number, beta2_sq: number, delta_sq: number, r: number, theta1: number, theta2: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly eminCurve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly phaseLandscape: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly pointSolution: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
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
