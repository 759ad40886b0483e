/* tslint:disable */
/* eslint-disable */

export class IrisTrainer {
    free(): void;
    [Symbol.dispose](): void;
    constructor(hidden: number, eta: number, batch_size: number, exact: boolean, seed: number);
    step(epochs: number): string;
}

export function encode_digit(pixels: Uint8Array, side: number, conv_like: boolean, kernel: number, stride: number, threshold: number): string;

export function srm_trace(delays: Float64Array, weights: Float64Array, tau1: number, tau2: number, v_th: number, horizon: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_iristrainer_free: (a: number, b: number) => void;
    readonly encode_digit: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly iristrainer_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly iristrainer_step: (a: number, b: number) => [number, number, number, number];
    readonly srm_trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
