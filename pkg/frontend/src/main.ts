import { ApiClient } from "./api";
import { mountApp } from "./ui";

const mount = document.getElementById("app");
if (mount) {
  mountApp(new ApiClient(""), mount);
}
