/** Wire types mirroring the gateway HTTP+JSON vocabulary. */
export {};
