/** Payload shapes of the labeling service's /api endpoints. */
export {};
