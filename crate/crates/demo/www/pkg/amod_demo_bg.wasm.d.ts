/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_playground_free: (a: number, b: number) => void;
export const playground_cells: (a: number) => [number, number];
export const playground_density: (a: number) => [number, number];
export const playground_lloyd_step: (a: number) => number;
export const playground_new: (a: number, b: number, c: bigint) => [number, number, number];
export const playground_node_count: (a: number) => number;
export const playground_node_regions: (a: number) => [number, number];
export const playground_node_xy: (a: number) => [number, number];
export const playground_objective: (a: number) => number;
export const playground_radius: (a: number) => number;
export const playground_scatter: (a: number, b: bigint) => void;
export const playground_set_radius: (a: number, b: number) => [number, number];
export const playground_simulate: (a: number, b: number, c: number, d: bigint, e: number) => [number, number, number, number];
export const playground_vehicles: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
