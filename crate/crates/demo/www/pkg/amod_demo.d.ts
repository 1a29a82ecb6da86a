/* tslint:disable */
/* eslint-disable */

export class Playground {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Owning vehicle per node, or -1 outside every cell. Cells never
     * cross region borders.
     */
    cells(): Int32Array;
    density(): Float64Array;
    /**
     * Moves every vehicle to the centroid of its cell and returns the new
     * coverage cost.
     */
    lloyd_step(): number;
    /**
     * A square grid city with five demand regions.
     */
    constructor(side: number, fleet: number, seed: bigint);
    node_count(): number;
    node_regions(): Uint32Array;
    /**
     * Node coordinates in kilometres, `x0, y0, x1, y1, ...`.
     */
    node_xy(): Float64Array;
    /**
     * Summed per-region coverage cost of the current positions.
     */
    objective(): number;
    radius(): number;
    /**
     * Puts every vehicle on a uniformly drawn node.
     */
    scatter(seed: bigint): void;
    set_radius(radius_km: number): void;
    /**
     * One simulated hour with `policy` (`no_control`, `lower_only` or
     * `lp_rebalance`); returns the headline metrics as JSON.
     */
    simulate(policy: string, seed: bigint, request_rate: number): string;
    vehicles(): Uint32Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_playground_free: (a: number, b: number) => void;
    readonly playground_cells: (a: number) => [number, number];
    readonly playground_density: (a: number) => [number, number];
    readonly playground_lloyd_step: (a: number) => number;
    readonly playground_new: (a: number, b: number, c: bigint) => [number, number, number];
    readonly playground_node_count: (a: number) => number;
    readonly playground_node_regions: (a: number) => [number, number];
    readonly playground_node_xy: (a: number) => [number, number];
    readonly playground_objective: (a: number) => number;
    readonly playground_radius: (a: number) => number;
    readonly playground_scatter: (a: number, b: bigint) => void;
    readonly playground_set_radius: (a: number, b: number) => [number, number];
    readonly playground_simulate: (a: number, b: number, c: number, d: bigint, e: number) => [number, number, number, number];
    readonly playground_vehicles: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
