import { MagecApi } from "./api.js";
import { createApp } from "./app.js";

createApp(document, new MagecApi(""));
